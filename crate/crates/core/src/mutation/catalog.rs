// SPDX-License-Identifier: Apache-2.0

//! Mutation operator catalog, loaded from TOML.

use serde::{Deserialize, Serialize};

use super::MutationError;

const BUILTIN: &str = include_str!("catalog.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    OperatorSwap,
    OperandReplace,
    ConstantPerturb,
    StatementDelete,
    StatementDuplicate,
    ControlFlowAlter,
    ReturnAlter,
    DeclarationAlter,
}

/// Rewrite rules known to the engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    BinaryOp,
    Incdec,
    CompoundAssign,
    OperandReplace,
    IndexShift,
    ConstAdd,
    ConstZero,
    StmtDelete,
    StmtDuplicate,
    CondNegate,
    IfConst,
    ElseRemove,
    BreakToContinue,
    ReturnZero,
    ReturnAdd,
    ReturnedAssignAdd,
    InitZero,
    InitAdd,
    TypeReplace,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MutationOperator {
    pub id: String,
    pub category: Category,
    pub rule: Rule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Catalog {
    #[serde(rename = "operator")]
    pub operators: Vec<MutationOperator>,
}

impl Catalog {
    pub fn builtin() -> Self {
        Self::parse(BUILTIN).expect("builtin catalog is valid")
    }

    pub fn parse(text: &str) -> Result<Self, MutationError> {
        let c: Catalog = toml::from_str(text).map_err(|e| MutationError::Catalog(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, MutationError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| MutationError::Catalog(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn validate(&self) -> Result<(), MutationError> {
        let mut seen = std::collections::BTreeSet::new();
        for op in &self.operators {
            if !seen.insert(op.id.as_str()) {
                return Err(MutationError::Catalog(format!("duplicate operator `{}`", op.id)));
            }
            let needs_from_to = matches!(
                op.rule,
                Rule::BinaryOp | Rule::Incdec | Rule::CompoundAssign | Rule::TypeReplace
            );
            if needs_from_to && (op.from.is_none() || op.to.is_none()) {
                return Err(MutationError::Catalog(format!(
                    "operator `{}` needs `from` and `to`",
                    op.id
                )));
            }
            if op.from.is_some() && op.from == op.to {
                return Err(MutationError::Catalog(format!("operator `{}` is an identity", op.id)));
            }
            let needs_delta = matches!(
                op.rule,
                Rule::ConstAdd
                    | Rule::IfConst
                    | Rule::ReturnAdd
                    | Rule::ReturnedAssignAdd
                    | Rule::InitAdd
                    | Rule::IndexShift
            );
            if needs_delta && op.delta.is_none() {
                return Err(MutationError::Catalog(format!("operator `{}` needs `delta`", op.id)));
            }
        }
        Ok(())
    }
}
