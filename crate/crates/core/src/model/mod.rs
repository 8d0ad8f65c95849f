//! Domain types shared by every other module: expressions, constraint
//! sets, set-valued maps, hybrid systems and solution records, plus the
//! textual scenario format.

pub mod expr;
pub mod maps;
pub mod scenario;
pub mod sets;
pub mod system;

pub use expr::{Expr, ExprError};
pub use maps::{MapError, Selection, SetValuedMap};
pub use scenario::{Scenario, ScenarioError};
pub use sets::{ConstraintSet, SetError, SetKind};
pub use system::{
    DisturbedHybridSystem, HybridArc, HybridSystem, HybridTimeDomain, JumpRecord, SystemError,
    TerminationClass,
};
