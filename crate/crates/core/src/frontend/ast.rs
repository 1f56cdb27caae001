// SPDX-License-Identifier: Apache-2.0

//! Syntax tree for the supported C subset.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn to(self, other: Span) -> Span {
        Span::new(self.start, other.end)
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn text(self, src: &str) -> &str {
        &src[self.start..self.end]
    }
}

/// An ACSL annotation comment as it appeared in the source.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotBlock {
    pub span: Span,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IntType {
    pub bits: u8,
    pub signed: bool,
}

impl IntType {
    pub const BOOL: IntType = IntType { bits: 1, signed: false };
    pub const CHAR: IntType = IntType { bits: 8, signed: true };
    pub const INT: IntType = IntType { bits: 32, signed: true };
    pub const UINT: IntType = IntType {
        bits: 32,
        signed: false,
    };
    pub const LONG: IntType = IntType { bits: 64, signed: true };
    pub const ULONG: IntType = IntType {
        bits: 64,
        signed: false,
    };

    pub fn min(self) -> i128 {
        if self.signed {
            -(1i128 << (self.bits - 1))
        } else {
            0
        }
    }

    pub fn max(self) -> i128 {
        if self.bits == 1 {
            1
        } else if self.signed {
            (1i128 << (self.bits - 1)) - 1
        } else {
            (1i128 << self.bits) - 1
        }
    }

    /// Two's-complement conversion into this type.
    pub fn wrap(self, v: i128) -> i128 {
        if self.bits == 1 {
            return (v != 0) as i128;
        }
        let m = 1i128 << self.bits;
        let r = v.rem_euclid(m);
        if self.signed && r > self.max() {
            r - m
        } else {
            r
        }
    }
}

/// Resolved C type.
#[derive(Debug, Clone, PartialEq)]
pub enum CType {
    Void,
    Int(IntType),
    Float,
    Pointer(Box<CType>),
    Array(Box<CType>, Option<u64>),
    Record {
        union: bool,
        tag: Option<String>,
    },
    Enum(Option<String>),
    /// A typedef name not defined in the unit and not a known builtin.
    Opaque(String),
}

impl CType {
    pub fn is_integer(&self) -> bool {
        matches!(self, CType::Int(_) | CType::Enum(_))
    }

    pub fn int_type(&self) -> Option<IntType> {
        match self {
            CType::Int(t) => Some(*t),
            CType::Enum(_) => Some(IntType::INT),
            _ => None,
        }
    }

    pub fn is_pointer_like(&self) -> bool {
        matches!(self, CType::Pointer(_) | CType::Array(..))
    }

    pub fn element(&self) -> Option<&CType> {
        match self {
            CType::Pointer(t) | CType::Array(t, _) => Some(t),
            _ => None,
        }
    }
}

/// Declaration specifiers as written, plus their resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct TypeSpec {
    pub span: Span,
    pub ty: CType,
    pub is_static: bool,
    pub is_typedef: bool,
    pub is_extern: bool,
    /// Names referenced by the specifiers (typedef names, struct/enum tags).
    pub refs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarDecl {
    pub name: String,
    pub name_span: Span,
    pub ty: CType,
    pub spec: TypeSpec,
    pub array_dims: Vec<Option<Expr>>,
    pub init: Option<Expr>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: Option<String>,
    pub ty: CType,
    pub spec: TypeSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Shl,
    Shr,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    BitAnd,
    BitOr,
    BitXor,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
            BinOp::Shl => "<<",
            BinOp::Shr => ">>",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::BitAnd => "&",
            BinOp::BitOr => "|",
            BinOp::BitXor => "^",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    pub fn from_symbol(s: &str) -> Option<BinOp> {
        use BinOp::*;
        Some(match s {
            "+" => Add,
            "-" => Sub,
            "*" => Mul,
            "/" => Div,
            "%" => Rem,
            "<<" => Shl,
            ">>" => Shr,
            "<" => Lt,
            "<=" => Le,
            ">" => Gt,
            ">=" => Ge,
            "==" => Eq,
            "!=" => Ne,
            "&" => BitAnd,
            "|" => BitOr,
            "^" => BitXor,
            "&&" => And,
            "||" => Or,
            _ => return None,
        })
    }

    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge | BinOp::Eq | BinOp::Ne
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnOp {
    Neg,
    Plus,
    Not,
    BitNot,
    Deref,
    AddrOf,
    PreInc,
    PreDec,
    PostInc,
    PostDec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Int(i128),
    Char(i128),
    Float(f64),
    Str(String),
    Ident(String),
    Unary {
        op: UnOp,
        op_span: Span,
        operand: Box<Expr>,
    },
    Binary {
        op: BinOp,
        op_span: Span,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    /// `lhs = rhs` or compound `lhs op= rhs`.
    Assign {
        op: Option<BinOp>,
        op_span: Span,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Cond(Box<Expr>, Box<Expr>, Box<Expr>),
    Call {
        callee: Box<Expr>,
        args: Vec<Expr>,
    },
    Index(Box<Expr>, Box<Expr>),
    Member {
        base: Box<Expr>,
        field: String,
        arrow: bool,
    },
    Cast(TypeSpec, Box<Expr>),
    SizeofType(TypeSpec),
    SizeofExpr(Box<Expr>),
    Comma(Box<Expr>, Box<Expr>),
    InitList(Vec<Expr>),
}

impl Expr {
    /// Visits this expression and all sub-expressions in pre-order.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Expr)) {
        f(self);
        match &self.kind {
            ExprKind::Unary { operand, .. } => operand.walk(f),
            ExprKind::Binary { lhs, rhs, .. } | ExprKind::Assign { lhs, rhs, .. } => {
                lhs.walk(f);
                rhs.walk(f);
            }
            ExprKind::Cond(a, b, c) => {
                a.walk(f);
                b.walk(f);
                c.walk(f);
            }
            ExprKind::Call { callee, args } => {
                callee.walk(f);
                for a in args {
                    a.walk(f);
                }
            }
            ExprKind::Index(a, b) | ExprKind::Comma(a, b) => {
                a.walk(f);
                b.walk(f);
            }
            ExprKind::Member { base, .. } => base.walk(f),
            ExprKind::Cast(_, e) | ExprKind::SizeofExpr(e) => e.walk(f),
            ExprKind::InitList(items) => {
                for e in items {
                    e.walk(f);
                }
            }
            ExprKind::Int(_)
            | ExprKind::Char(_)
            | ExprKind::Float(_)
            | ExprKind::Str(_)
            | ExprKind::Ident(_)
            | ExprKind::SizeofType(_) => {}
        }
    }

    pub fn called_name(&self) -> Option<&str> {
        match &self.kind {
            ExprKind::Call { callee, .. } => match &callee.kind {
                ExprKind::Ident(n) => Some(n),
                _ => None,
            },
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub stmts: Vec<Stmt>,
    /// Annotations between the last statement and the closing brace.
    pub trailing_annots: Vec<AnnotBlock>,
    pub span: Span,
}

impl Block {
    /// Offset of the closing brace.
    pub fn close_brace(&self) -> usize {
        self.span.end - 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ForInit {
    Decl(Vec<VarDecl>),
    Expr(Expr),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Span,
    /// Annotation comments immediately preceding the statement.
    pub annots: Vec<AnnotBlock>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StmtKind {
    Block(Block),
    Decl(Vec<VarDecl>),
    Expr(Expr),
    Empty,
    If {
        cond: Expr,
        then: Box<Stmt>,
        els: Option<Box<Stmt>>,
    },
    While {
        cond: Expr,
        body: Box<Stmt>,
    },
    DoWhile {
        body: Box<Stmt>,
        cond: Expr,
    },
    For {
        init: Option<ForInit>,
        cond: Option<Expr>,
        step: Option<Expr>,
        body: Box<Stmt>,
    },
    Switch {
        cond: Expr,
        body: Box<Stmt>,
    },
    Case {
        value: Expr,
        body: Box<Stmt>,
    },
    Default {
        body: Box<Stmt>,
    },
    Break,
    Continue,
    Return(Option<Expr>),
}

impl Stmt {
    pub fn is_loop(&self) -> bool {
        matches!(
            self.kind,
            StmtKind::While { .. } | StmtKind::DoWhile { .. } | StmtKind::For { .. }
        )
    }

    /// Structural children, in the order used by child-index paths.
    pub fn children(&self) -> Vec<&Stmt> {
        match &self.kind {
            StmtKind::Block(b) => b.stmts.iter().collect(),
            StmtKind::If { then, els, .. } => {
                let mut v = vec![then.as_ref()];
                if let Some(e) = els {
                    v.push(e);
                }
                v
            }
            StmtKind::While { body, .. }
            | StmtKind::DoWhile { body, .. }
            | StmtKind::For { body, .. }
            | StmtKind::Switch { body, .. }
            | StmtKind::Case { body, .. }
            | StmtKind::Default { body } => vec![body.as_ref()],
            _ => Vec::new(),
        }
    }

    /// Expressions owned directly by this statement (not by children).
    pub fn exprs(&self) -> Vec<&Expr> {
        match &self.kind {
            StmtKind::Decl(vars) => vars.iter().filter_map(|v| v.init.as_ref()).collect(),
            StmtKind::Expr(e) => vec![e],
            StmtKind::If { cond, .. }
            | StmtKind::While { cond, .. }
            | StmtKind::DoWhile { cond, .. }
            | StmtKind::Switch { cond, .. }
            | StmtKind::Case { value: cond, .. } => vec![cond],
            StmtKind::For { init, cond, step, .. } => {
                let mut v = Vec::new();
                match init {
                    Some(ForInit::Expr(e)) => v.push(e),
                    Some(ForInit::Decl(vars)) => v.extend(vars.iter().filter_map(|d| d.init.as_ref())),
                    None => {}
                }
                v.extend(cond.iter());
                v.extend(step.iter());
                v
            }
            StmtKind::Return(Some(e)) => vec![e],
            _ => Vec::new(),
        }
    }

    /// Pre-order walk over this statement and all nested statements.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Stmt)) {
        f(self);
        for c in self.children() {
            c.walk(f);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionSig {
    pub name: String,
    pub name_span: Span,
    pub ret: CType,
    pub ret_spec: TypeSpec,
    pub params: Vec<Param>,
    pub variadic: bool,
    pub is_static: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionDef {
    pub sig: FunctionSig,
    pub body: Block,
}

impl FunctionDef {
    /// Resolves a child-index path from the body root.
    pub fn stmt_at(&self, path: &[usize]) -> Option<&Stmt> {
        let (first, rest) = path.split_first()?;
        let mut cur = self.body.stmts.get(*first)?;
        for &i in rest {
            cur = *cur.children().get(i)?;
        }
        Some(cur)
    }

    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Stmt)) {
        for s in &self.body.stmts {
            s.walk(f);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Enumerator {
    pub name: String,
    pub value: Option<Expr>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DeclKind {
    FunctionDef,
    /// Function declaration without a body in this unit.
    Prototype,
    TypeDef,
    StructOrUnionDef,
    EnumDef,
    GlobalVarDecl,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Item {
    Function(FunctionDef),
    Prototype(FunctionSig),
    Typedef {
        name: String,
        ty: CType,
    },
    Record {
        tag: String,
        union: bool,
    },
    Enum {
        tag: Option<String>,
        enumerators: Vec<Enumerator>,
    },
    Globals(Vec<VarDecl>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DeclId(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Declaration {
    pub id: DeclId,
    pub kind: DeclKind,
    pub name: String,
    /// Other ordinary identifiers or tags introduced (enumerators, extra declarators, tags).
    pub also_defines: Vec<String>,
    /// Struct/union/enum tags introduced (separate namespace).
    pub tags: Vec<String>,
    pub span: Span,
    /// Source text covered by `span`.
    pub text: String,
    pub referenced_names: BTreeSet<String>,
    /// Annotation comments directly preceding the declaration (function contracts).
    pub annots: Vec<AnnotBlock>,
    pub item: Item,
}

impl Declaration {
    pub fn function(&self) -> Option<&FunctionDef> {
        match &self.item {
            Item::Function(f) => Some(f),
            _ => None,
        }
    }

    pub fn signature(&self) -> Option<&FunctionSig> {
        match &self.item {
            Item::Function(f) => Some(&f.sig),
            Item::Prototype(s) => Some(s),
            _ => None,
        }
    }

    pub fn defines(&self, name: &str) -> bool {
        self.name == name || self.also_defines.iter().any(|n| n == name) || self.tags.iter().any(|n| n == name)
    }

    /// Ordinary identifiers (functions, variables, typedefs, enumerators).
    pub fn ordinary_names(&self) -> Vec<&str> {
        let mut v = Vec::new();
        if !self.tags.contains(&self.name) {
            v.push(self.name.as_str());
        }
        v.extend(self.also_defines.iter().map(String::as_str));
        v
    }
}
