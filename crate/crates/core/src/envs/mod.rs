//! Benchmark environments: Dirichlet random Markov games and a gridworld
//! kitchen.

mod kitchen;
mod random_mg;

pub use kitchen::{
    build_kitchen, chef_intrinsic_reward, Carry, ChefTask, KitchenCodec, KitchenLayout,
    KitchenState, PotState, SlotState, StepEvents, KITCHEN_ACTIONS, REFERENCE_LAYOUT,
};
pub use random_mg::{generate_random_mg, RandomMgConfig, Sparsity};
