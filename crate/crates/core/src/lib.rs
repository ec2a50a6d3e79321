pub mod balance;
pub mod conjugacy;
pub mod equilibrium;
pub mod graph;
pub mod io;
pub mod kinetics;
pub mod milp;
pub mod network;
