
mod evt;
mod qmodel1;
mod qmodel2;
mod sim;
