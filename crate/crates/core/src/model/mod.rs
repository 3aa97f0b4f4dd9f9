//! Typed syntax and evaluation semantics for models and property formulas.

pub mod ast;
mod bind;
mod typecheck;
mod value;

pub use ast::*;
pub use bind::{
    bind_constants, eval_expr, expand_formulas, BindError, BoundCommand, BoundModel, BoundReward,
    BoundUpdate, CExpr, VarInfo,
};
pub use typecheck::{type_check, SymbolKind, TypedModel};
pub use value::{apply_binary, apply_unary, EvalError, Type, Value};
