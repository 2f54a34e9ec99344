#![allow(dead_code)]

pub mod editor_ref;
pub mod fsm_oracle;
