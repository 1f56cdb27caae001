// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeSet, HashMap};

use super::ast::*;
use super::lexer::{tokenize, LineIndex, TokKind, Token};
use super::ParseError;

/// Typedef names assumed to exist even though their definitions were
/// stripped by preprocessing (standard headers).
pub(crate) fn builtin_typedef(name: &str) -> Option<CType> {
    let t = |bits, signed| Some(CType::Int(IntType { bits, signed }));
    match name {
        "int8_t" => t(8, true),
        "uint8_t" => t(8, false),
        "int16_t" => t(16, true),
        "uint16_t" => t(16, false),
        "int32_t" => t(32, true),
        "uint32_t" => t(32, false),
        "int64_t" | "intptr_t" | "ptrdiff_t" | "ssize_t" | "intmax_t" => t(64, true),
        "uint64_t" | "uintptr_t" | "size_t" | "uintmax_t" => t(64, false),
        "bool" => Some(CType::Int(IntType::BOOL)),
        "FILE" => Some(CType::Opaque("FILE".into())),
        _ => None,
    }
}

const STORAGE: &[&str] = &[
    "typedef",
    "static",
    "extern",
    "register",
    "auto",
    "inline",
    "__inline",
    "__inline__",
    "_Noreturn",
];
const QUALIFIERS: &[&str] = &["const", "volatile", "restrict", "__restrict", "__restrict__", "__const"];
const TYPE_KEYWORDS: &[&str] = &[
    "void",
    "char",
    "short",
    "int",
    "long",
    "float",
    "double",
    "signed",
    "unsigned",
    "_Bool",
    "__signed__",
];

pub(crate) fn is_keyword(s: &str) -> bool {
    STORAGE.contains(&s)
        || QUALIFIERS.contains(&s)
        || TYPE_KEYWORDS.contains(&s)
        || matches!(
            s,
            "struct"
                | "union"
                | "enum"
                | "if"
                | "else"
                | "while"
                | "do"
                | "for"
                | "switch"
                | "case"
                | "default"
                | "break"
                | "continue"
                | "return"
                | "goto"
                | "sizeof"
                | "asm"
                | "__asm__"
                | "__attribute__"
                | "__extension__"
        )
}

#[derive(Debug)]
struct Declarator {
    name: Option<(String, Span)>,
    pointers: usize,
    arrays: Vec<Option<Expr>>,
    params: Option<(Vec<Param>, bool)>,
}

/// A declaration as parsed, before ids and references are assigned.
struct RawDecl {
    kind: DeclKind,
    name: String,
    also_defines: Vec<String>,
    tags: Vec<String>,
    span: Span,
    annots: Vec<AnnotBlock>,
    item: Item,
    spec_refs: Vec<String>,
}

pub struct Parser<'a> {
    src: &'a str,
    toks: Vec<Token>,
    pos: usize,
    lines: LineIndex,
    typedefs: HashMap<String, CType>,
}

impl<'a> Parser<'a> {
    pub fn new(src: &'a str) -> Result<Self, ParseError> {
        Ok(Self {
            src,
            toks: tokenize(src)?,
            pos: 0,
            lines: LineIndex::new(src),
            typedefs: HashMap::new(),
        })
    }

    pub fn declare_type(&mut self, name: &str) {
        let ty = builtin_typedef(name).unwrap_or_else(|| CType::Opaque(name.to_string()));
        self.typedefs.entry(name.to_string()).or_insert(ty);
    }

    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn peek_at(&self, k: usize) -> &Token {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)]
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn prev_end(&self) -> usize {
        if self.pos == 0 {
            0
        } else {
            self.toks[self.pos - 1].span.end
        }
    }

    fn err_at(&self, offset: usize, msg: impl Into<String>) -> ParseError {
        let (line, column) = self.lines.line_col(offset);
        ParseError::Syntax {
            line,
            column,
            message: msg.into(),
        }
    }

    fn err(&self, msg: impl Into<String>) -> ParseError {
        self.err_at(self.peek().span.start, msg)
    }

    fn eat(&mut self, p: &str) -> bool {
        if self.peek().is_punct(p) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, p: &str) -> Result<Token, ParseError> {
        if self.peek().is_punct(p) {
            Ok(self.bump())
        } else {
            Err(self.err(format!("expected `{p}`, found {}", self.describe())))
        }
    }

    fn describe(&self) -> String {
        match &self.peek().kind {
            TokKind::Eof => "end of input".into(),
            _ => format!("`{}`", self.peek().span.text(self.src)),
        }
    }

    fn expect_ident(&mut self) -> Result<(String, Span), ParseError> {
        match &self.peek().kind {
            TokKind::Ident(s) if !is_keyword(s) => {
                let s = s.clone();
                let t = self.bump();
                Ok((s, t.span))
            }
            _ => Err(self.err(format!("expected identifier, found {}", self.describe()))),
        }
    }

    fn take_annots(&mut self) -> Vec<AnnotBlock> {
        let mut v = Vec::new();
        while let TokKind::Annot(text) = &self.peek().kind {
            v.push(AnnotBlock {
                span: self.peek().span,
                text: text.clone(),
            });
            self.bump();
        }
        v
    }

    fn skip_attributes(&mut self) -> Result<(), ParseError> {
        while self.peek().is_ident("__attribute__") || self.peek().is_ident("__extension__") {
            let attr = self.peek().is_ident("__attribute__");
            self.bump();
            if attr {
                self.expect("(")?;
                let mut depth = 1;
                while depth > 0 {
                    let t = self.bump();
                    match &t.kind {
                        TokKind::Punct("(") => depth += 1,
                        TokKind::Punct(")") => depth -= 1,
                        TokKind::Eof => return Err(self.err("unterminated __attribute__")),
                        _ => {}
                    }
                }
            }
        }
        Ok(())
    }

    fn is_type_start(&self, t: &Token) -> bool {
        match &t.kind {
            TokKind::Ident(s) => {
                STORAGE.contains(&s.as_str())
                    || QUALIFIERS.contains(&s.as_str())
                    || TYPE_KEYWORDS.contains(&s.as_str())
                    || matches!(s.as_str(), "struct" | "union" | "enum" | "__extension__")
                    || self.typedefs.contains_key(s)
                    || builtin_typedef(s).is_some()
            }
            _ => false,
        }
    }

    pub fn parse_unit(mut self) -> Result<Vec<Declaration>, ParseError> {
        let mut raws: Vec<RawDecl> = Vec::new();
        loop {
            let annots = self.take_annots();
            if matches!(self.peek().kind, TokKind::Eof) {
                break;
            }
            if self.eat(";") {
                continue;
            }
            self.parse_external(annots, &mut raws)?;
        }
        // A prototype followed by its definition contributes only its
        // annotations to the definition.
        let defined: BTreeSet<String> = raws
            .iter()
            .filter(|r| r.kind == DeclKind::FunctionDef)
            .map(|r| r.name.clone())
            .collect();
        let global_defs: BTreeSet<String> = raws
            .iter()
            .filter_map(|r| match &r.item {
                Item::Globals(vars) => Some(vars),
                _ => None,
            })
            .flatten()
            .filter(|v| !v.spec.is_extern)
            .map(|v| v.name.clone())
            .collect();
        let mut carried: HashMap<String, Vec<AnnotBlock>> = HashMap::new();
        let mut seen_protos = BTreeSet::new();
        let mut kept = Vec::new();
        for r in raws {
            if r.kind == DeclKind::Prototype && (defined.contains(&r.name) || !seen_protos.insert(r.name.clone())) {
                carried.entry(r.name.clone()).or_default().extend(r.annots);
                continue;
            }
            if let Item::Globals(vars) = &r.item {
                // `extern int x;` next to a definition of `x`
                if vars.iter().all(|v| v.spec.is_extern && global_defs.contains(&v.name)) {
                    continue;
                }
            }
            kept.push(r);
        }
        let mut out = Vec::with_capacity(kept.len());
        for (i, mut r) in kept.into_iter().enumerate() {
            if let Some(extra) = carried.remove(&r.name) {
                if r.kind == DeclKind::FunctionDef {
                    let mut a = extra;
                    a.append(&mut r.annots);
                    r.annots = a;
                }
            }
            let mut own = r.also_defines.clone();
            own.extend(r.tags.iter().cloned());
            let referenced_names = super::refs::referenced_names(&r.kind, &r.name, &own, &r.item, &r.spec_refs);
            out.push(Declaration {
                id: DeclId(i),
                kind: r.kind,
                name: r.name,
                also_defines: r.also_defines,
                tags: r.tags,
                text: r.span.text(self.src).to_string(),
                span: r.span,
                referenced_names,
                annots: r.annots,
                item: r.item,
            });
        }
        Ok(out)
    }

    fn parse_external(&mut self, annots: Vec<AnnotBlock>, out: &mut Vec<RawDecl>) -> Result<(), ParseError> {
        let start = self.peek().span.start;
        if self.peek().is_ident("asm") || self.peek().is_ident("__asm__") {
            return Err(self.err("inline assembly is not supported"));
        }
        if !self.is_type_start(self.peek()) {
            return Err(self.err(format!("expected a declaration, found {}", self.describe())));
        }
        let (spec, defined) = self.parse_specifiers()?;
        if self.eat(";") {
            let span = Span::new(start, self.prev_end());
            match defined {
                Defined::Record { tag, union } => out.push(RawDecl {
                    kind: DeclKind::StructOrUnionDef,
                    name: tag.clone(),
                    also_defines: Vec::new(),
                    tags: vec![tag.clone()],
                    span,
                    annots,
                    item: Item::Record { tag, union },
                    spec_refs: spec.refs.clone(),
                }),
                Defined::Enum { tag, enumerators } => {
                    let mut names: Vec<String> = enumerators.iter().map(|e| e.name.clone()).collect();
                    let name = match &tag {
                        Some(t) => t.clone(),
                        None if !names.is_empty() => names.remove(0),
                        None => return Err(self.err_at(start, "empty anonymous enum")),
                    };
                    out.push(RawDecl {
                        kind: DeclKind::EnumDef,
                        name,
                        also_defines: names,
                        tags: tag.iter().cloned().collect(),
                        span,
                        annots,
                        item: Item::Enum { tag, enumerators },
                        spec_refs: spec.refs.clone(),
                    })
                }
                Defined::Nothing => {}
            }
            return Ok(());
        }

        let mut decls = Vec::new();
        loop {
            let d = self.parse_declarator(false)?;
            self.skip_attributes()?;
            decls.push(d);
            if !self.eat(",") {
                break;
            }
        }
        let first = &decls[0];
        let (name, _name_span) = first
            .name
            .clone()
            .ok_or_else(|| self.err_at(start, "declaration without a name"))?;

        if let Some((params, variadic)) = &first.params {
            if decls.len() != 1 {
                return Err(self.err_at(start, "mixed function and variable declarators"));
            }
            let ret = self.wrap_pointers(spec.ty.clone(), first.pointers);
            let sig = FunctionSig {
                name: name.clone(),
                name_span: first.name.as_ref().unwrap().1,
                ret,
                ret_spec: spec.clone(),
                params: params.clone(),
                variadic: *variadic,
                is_static: spec.is_static,
            };
            if spec.is_typedef {
                return Err(self.err_at(start, "function typedefs are not supported"));
            }
            if self.peek().is_punct("{") {
                if sig.variadic {
                    return Err(self.err_at(start, "variadic function definitions are not supported"));
                }
                let body = self.parse_block()?;
                out.push(RawDecl {
                    kind: DeclKind::FunctionDef,
                    name,
                    also_defines: Vec::new(),
                    tags: Vec::new(),
                    span: Span::new(start, self.prev_end()),
                    annots,
                    item: Item::Function(FunctionDef { sig, body }),
                    spec_refs: spec.refs.clone(),
                });
            } else {
                self.expect(";")?;
                out.push(RawDecl {
                    kind: DeclKind::Prototype,
                    name,
                    also_defines: Vec::new(),
                    tags: Vec::new(),
                    span: Span::new(start, self.prev_end()),
                    annots,
                    item: Item::Prototype(sig),
                    spec_refs: spec.refs.clone(),
                });
            }
            return Ok(());
        }

        let mut also: Vec<String> = Vec::new();
        let mut tags: Vec<String> = Vec::new();
        if let Defined::Record { tag, .. } = &defined {
            tags.push(tag.clone());
        }
        if let Defined::Enum { tag, enumerators } = &defined {
            tags.extend(tag.iter().cloned());
            also.extend(enumerators.iter().map(|e| e.name.clone()));
        }

        if spec.is_typedef {
            let mut ty0 = None;
            for d in &decls {
                if d.params.is_some() {
                    return Err(self.err_at(start, "function typedefs are not supported"));
                }
                let ty = self.apply_declarator(spec.ty.clone(), d)?;
                if let Some((n, _)) = &d.name {
                    self.typedefs.insert(n.clone(), ty.clone());
                }
                ty0.get_or_insert(ty);
            }
            self.expect(";")?;
            let mut spec_refs = spec.refs.clone();
            for d in &decls {
                for e in d.arrays.iter().flatten() {
                    collect_idents(e, &mut spec_refs);
                }
            }
            also.extend(
                decls
                    .iter()
                    .skip(1)
                    .filter_map(|d| d.name.as_ref().map(|n| n.0.clone())),
            );
            out.push(RawDecl {
                kind: DeclKind::TypeDef,
                name: name.clone(),
                also_defines: also,
                tags,
                span: Span::new(start, self.prev_end()),
                annots,
                item: Item::Typedef { name, ty: ty0.unwrap() },
                spec_refs,
            });
            return Ok(());
        }

        // global variables; initializers follow each declarator
        self.pos = self.rewind_to_declarators(start)?;
        let vars = self.parse_var_list(&spec)?;
        self.expect(";")?;
        also.extend(vars.iter().skip(1).map(|v| v.name.clone()));
        out.push(RawDecl {
            kind: DeclKind::GlobalVarDecl,
            name,
            also_defines: also,
            tags,
            span: Span::new(start, self.prev_end()),
            annots,
            item: Item::Globals(vars),
            spec_refs: spec.refs.clone(),
        });
        Ok(())
    }

    /// Re-positions the cursor right after the declaration specifiers that start at `start`.
    fn rewind_to_declarators(&mut self, start: usize) -> Result<usize, ParseError> {
        let idx = self
            .toks
            .iter()
            .position(|t| t.span.start == start)
            .expect("declaration start token");
        self.pos = idx;
        self.parse_specifiers()?;
        Ok(self.pos)
    }

    fn parse_var_list(&mut self, spec: &TypeSpec) -> Result<Vec<VarDecl>, ParseError> {
        let mut vars = Vec::new();
        loop {
            let d_start = self.peek().span.start;
            let d = self.parse_declarator(false)?;
            if d.params.is_some() {
                return Err(self.err_at(d_start, "function declarator in variable declaration"));
            }
            let (name, name_span) = d
                .name
                .clone()
                .ok_or_else(|| self.err_at(d_start, "expected variable name"))?;
            let ty = self.apply_declarator(spec.ty.clone(), &d)?;
            self.skip_attributes()?;
            let init = if self.eat("=") {
                Some(self.parse_initializer()?)
            } else {
                None
            };
            vars.push(VarDecl {
                name,
                name_span,
                ty,
                spec: spec.clone(),
                array_dims: d.arrays,
                init,
                span: Span::new(d_start, self.prev_end()),
            });
            if !self.eat(",") {
                break;
            }
        }
        Ok(vars)
    }

    fn parse_initializer(&mut self) -> Result<Expr, ParseError> {
        if self.peek().is_punct("{") {
            let start = self.bump().span.start;
            let mut items = Vec::new();
            while !self.peek().is_punct("}") {
                if self.peek().is_punct(".") || self.peek().is_punct("[") {
                    return Err(self.err("designated initializers are not supported"));
                }
                items.push(self.parse_initializer()?);
                if !self.eat(",") {
                    break;
                }
            }
            self.expect("}")?;
            Ok(Expr {
                kind: ExprKind::InitList(items),
                span: Span::new(start, self.prev_end()),
            })
        } else {
            self.parse_assign()
        }
    }

    fn wrap_pointers(&self, mut ty: CType, n: usize) -> CType {
        for _ in 0..n {
            ty = CType::Pointer(Box::new(ty));
        }
        ty
    }

    fn apply_declarator(&self, base: CType, d: &Declarator) -> Result<CType, ParseError> {
        let mut ty = self.wrap_pointers(base, d.pointers);
        for dim in d.arrays.iter().rev() {
            let n = match dim {
                Some(e) => Some(
                    super::const_eval(e, &|_| None)
                        .filter(|v| *v >= 0)
                        .map(|v| v as u64)
                        .ok_or_else(|| self.err_at(e.span.start, "array size must be a constant"))?,
                ),
                None => None,
            };
            ty = CType::Array(Box::new(ty), n);
        }
        Ok(ty)
    }

    fn parse_specifiers(&mut self) -> Result<(TypeSpec, Defined), ParseError> {
        let start = self.peek().span.start;
        let mut is_static = false;
        let mut is_typedef = false;
        let mut is_extern = false;
        let mut kws: Vec<String> = Vec::new();
        let mut ty: Option<CType> = None;
        let mut refs = Vec::new();
        let mut defined = Defined::Nothing;
        loop {
            self.skip_attributes()?;
            let t = self.peek().clone();
            let Some(s) = t.ident() else { break };
            if STORAGE.contains(&s) {
                match s {
                    "static" => is_static = true,
                    "typedef" => is_typedef = true,
                    "extern" => is_extern = true,
                    _ => {}
                }
                self.bump();
            } else if QUALIFIERS.contains(&s) {
                self.bump();
            } else if TYPE_KEYWORDS.contains(&s) {
                kws.push(s.to_string());
                self.bump();
            } else if s == "struct" || s == "union" {
                let union = s == "union";
                self.bump();
                self.skip_attributes()?;
                let tag = match self.peek().ident() {
                    Some(n) if !is_keyword(n) => Some(self.expect_ident()?.0),
                    _ => None,
                };
                if self.peek().is_punct("{") {
                    self.parse_record_body(&mut refs)?;
                    if let Some(tag) = &tag {
                        defined = Defined::Record {
                            tag: tag.clone(),
                            union,
                        };
                    }
                } else if let Some(tag) = &tag {
                    refs.push(tag.clone());
                } else {
                    return Err(self.err("expected struct tag or body"));
                }
                ty = Some(CType::Record { union, tag });
            } else if s == "enum" {
                self.bump();
                let tag = match self.peek().ident() {
                    Some(n) if !is_keyword(n) => Some(self.expect_ident()?.0),
                    _ => None,
                };
                if self.peek().is_punct("{") {
                    let enumerators = self.parse_enum_body(&mut refs)?;
                    defined = Defined::Enum {
                        tag: tag.clone(),
                        enumerators,
                    };
                } else if let Some(tag) = &tag {
                    refs.push(tag.clone());
                } else {
                    return Err(self.err("expected enum tag or body"));
                }
                ty = Some(CType::Enum(tag));
            } else if ty.is_none() && kws.is_empty() && self.typedefs.contains_key(s) {
                ty = Some(self.typedefs[s].clone());
                refs.push(s.to_string());
                self.bump();
            } else if ty.is_none() && kws.is_empty() && builtin_typedef(s).is_some() {
                ty = builtin_typedef(s);
                refs.push(s.to_string());
                self.bump();
            } else {
                break;
            }
        }
        let ty = match ty {
            Some(t) => {
                if !kws.is_empty() {
                    return Err(self.err_at(start, "conflicting type specifiers"));
                }
                t
            }
            None => resolve_keywords(&kws)
                .ok_or_else(|| self.err_at(start, format!("expected a type, found {}", self.describe())))?,
        };
        let spec = TypeSpec {
            span: Span::new(start, self.prev_end().max(start)),
            ty,
            is_static,
            is_typedef,
            is_extern,
            refs,
        };
        Ok((spec, defined))
    }

    fn parse_record_body(&mut self, refs: &mut Vec<String>) -> Result<(), ParseError> {
        self.expect("{")?;
        while !self.eat("}") {
            self.take_annots();
            if self.peek().is_punct("}") {
                continue;
            }
            let (spec, _) = self.parse_specifiers()?;
            refs.extend(spec.refs.iter().cloned());
            if !self.peek().is_punct(";") {
                loop {
                    if self.peek().is_punct(":") {
                        self.bump();
                        self.parse_cond()?;
                    } else {
                        let d = self.parse_declarator(false)?;
                        for e in d.arrays.iter().flatten() {
                            collect_idents(e, refs);
                        }
                        if self.eat(":") {
                            self.parse_cond()?;
                        }
                    }
                    self.skip_attributes()?;
                    if !self.eat(",") {
                        break;
                    }
                }
            }
            self.expect(";")?;
        }
        Ok(())
    }

    fn parse_enum_body(&mut self, refs: &mut Vec<String>) -> Result<Vec<Enumerator>, ParseError> {
        self.expect("{")?;
        let mut v = Vec::new();
        while !self.peek().is_punct("}") {
            let (name, _) = self.expect_ident()?;
            let value = if self.eat("=") {
                let e = self.parse_cond()?;
                collect_idents(&e, refs);
                Some(e)
            } else {
                None
            };
            v.push(Enumerator { name, value });
            if !self.eat(",") {
                break;
            }
        }
        self.expect("}")?;
        Ok(v)
    }

    fn parse_declarator(&mut self, abstract_ok: bool) -> Result<Declarator, ParseError> {
        let mut pointers = 0;
        while self.eat("*") {
            pointers += 1;
            while self.peek().ident().is_some_and(|s| QUALIFIERS.contains(&s)) {
                self.bump();
            }
            self.skip_attributes()?;
        }
        if self.peek().is_punct("(") {
            if self.peek_at(1).is_punct("*") || self.peek_at(1).is_punct("^") {
                return Err(self.err("function pointers are not supported"));
            }
            if !abstract_ok {
                return Err(self.err("parenthesized declarators are not supported"));
            }
        }
        let name = match self.peek().ident() {
            Some(n) if !is_keyword(n) => Some(self.expect_ident()?),
            _ if abstract_ok => None,
            _ => return Err(self.err(format!("expected identifier, found {}", self.describe()))),
        };
        let mut arrays = Vec::new();
        let mut params = None;
        loop {
            if self.eat("[") {
                while self
                    .peek()
                    .ident()
                    .is_some_and(|s| QUALIFIERS.contains(&s) || s == "static")
                {
                    self.bump();
                }
                if self.eat("]") {
                    arrays.push(None);
                } else {
                    let e = self.parse_cond()?;
                    self.expect("]")?;
                    arrays.push(Some(e));
                }
            } else if self.peek().is_punct("(") && params.is_none() && arrays.is_empty() {
                self.bump();
                params = Some(self.parse_params()?);
            } else {
                break;
            }
        }
        Ok(Declarator {
            name,
            pointers,
            arrays,
            params,
        })
    }

    fn parse_params(&mut self) -> Result<(Vec<Param>, bool), ParseError> {
        let mut params = Vec::new();
        let mut variadic = false;
        if self.eat(")") {
            return Ok((params, false));
        }
        if self.peek().is_ident("void") && self.peek_at(1).is_punct(")") {
            self.bump();
            self.bump();
            return Ok((params, false));
        }
        loop {
            if self.eat("...") {
                variadic = true;
                break;
            }
            let (spec, _) = self.parse_specifiers()?;
            let d = self.parse_declarator(true)?;
            if d.params.is_some() {
                return Err(self.err("function pointer parameters are not supported"));
            }
            let mut ty = self.wrap_pointers(spec.ty.clone(), d.pointers);
            // array parameters decay to pointers; inner dimensions are kept
            let mut dims = d.arrays.iter().rev().collect::<Vec<_>>();
            if let Some(_outer) = dims.pop() {
                for dim in dims {
                    let n = dim
                        .as_ref()
                        .and_then(|e| super::const_eval(e, &|_| None))
                        .map(|v| v as u64);
                    ty = CType::Array(Box::new(ty), n);
                }
                ty = CType::Pointer(Box::new(ty));
            }
            params.push(Param {
                name: d.name.map(|n| n.0),
                ty,
                spec,
            });
            if !self.eat(",") {
                break;
            }
        }
        self.expect(")")?;
        Ok((params, variadic))
    }

    // ---------------------------------------------------------------- statements

    pub(crate) fn parse_block(&mut self) -> Result<Block, ParseError> {
        let start = self.expect("{")?.span.start;
        let mut stmts = Vec::new();
        let trailing_annots;
        loop {
            let annots = self.take_annots();
            if self.eat("}") {
                trailing_annots = annots;
                break;
            }
            if matches!(self.peek().kind, TokKind::Eof) {
                return Err(self.err("unexpected end of input inside block"));
            }
            stmts.push(self.parse_stmt_with(annots)?);
        }
        Ok(Block {
            stmts,
            trailing_annots,
            span: Span::new(start, self.prev_end()),
        })
    }

    fn parse_stmt(&mut self) -> Result<Stmt, ParseError> {
        let annots = self.take_annots();
        self.parse_stmt_with(annots)
    }

    fn parse_stmt_with(&mut self, annots: Vec<AnnotBlock>) -> Result<Stmt, ParseError> {
        let start = self.peek().span.start;
        let kw = self.peek().ident().map(str::to_string);
        let kind = match kw.as_deref() {
            _ if self.peek().is_punct("{") => StmtKind::Block(self.parse_block()?),
            _ if self.peek().is_punct(";") => {
                self.bump();
                StmtKind::Empty
            }
            Some("if") => {
                self.bump();
                self.expect("(")?;
                let cond = self.parse_expr()?;
                self.expect(")")?;
                let then = Box::new(self.parse_stmt()?);
                let els = if self.peek().is_ident("else") {
                    self.bump();
                    Some(Box::new(self.parse_stmt()?))
                } else {
                    None
                };
                StmtKind::If { cond, then, els }
            }
            Some("while") => {
                self.bump();
                self.expect("(")?;
                let cond = self.parse_expr()?;
                self.expect(")")?;
                StmtKind::While {
                    cond,
                    body: Box::new(self.parse_stmt()?),
                }
            }
            Some("do") => {
                self.bump();
                let body = Box::new(self.parse_stmt()?);
                if !self.peek().is_ident("while") {
                    return Err(self.err("expected `while` after do-body"));
                }
                self.bump();
                self.expect("(")?;
                let cond = self.parse_expr()?;
                self.expect(")")?;
                self.expect(";")?;
                StmtKind::DoWhile { body, cond }
            }
            Some("for") => {
                self.bump();
                self.expect("(")?;
                let init = if self.eat(";") {
                    None
                } else if self.is_type_start(self.peek()) {
                    let (spec, _) = self.parse_specifiers()?;
                    let vars = self.parse_var_list(&spec)?;
                    self.expect(";")?;
                    Some(ForInit::Decl(vars))
                } else {
                    let e = self.parse_expr()?;
                    self.expect(";")?;
                    Some(ForInit::Expr(e))
                };
                let cond = if self.peek().is_punct(";") {
                    None
                } else {
                    Some(self.parse_expr()?)
                };
                self.expect(";")?;
                let step = if self.peek().is_punct(")") {
                    None
                } else {
                    Some(self.parse_expr()?)
                };
                self.expect(")")?;
                StmtKind::For {
                    init,
                    cond,
                    step,
                    body: Box::new(self.parse_stmt()?),
                }
            }
            Some("switch") => {
                self.bump();
                self.expect("(")?;
                let cond = self.parse_expr()?;
                self.expect(")")?;
                StmtKind::Switch {
                    cond,
                    body: Box::new(self.parse_stmt()?),
                }
            }
            Some("case") => {
                self.bump();
                let value = self.parse_cond()?;
                self.expect(":")?;
                StmtKind::Case {
                    value,
                    body: Box::new(self.parse_stmt()?),
                }
            }
            Some("default") => {
                self.bump();
                self.expect(":")?;
                StmtKind::Default {
                    body: Box::new(self.parse_stmt()?),
                }
            }
            Some("break") => {
                self.bump();
                self.expect(";")?;
                StmtKind::Break
            }
            Some("continue") => {
                self.bump();
                self.expect(";")?;
                StmtKind::Continue
            }
            Some("return") => {
                self.bump();
                let e = if self.peek().is_punct(";") {
                    None
                } else {
                    Some(self.parse_expr()?)
                };
                self.expect(";")?;
                StmtKind::Return(e)
            }
            Some("goto") => return Err(self.err("`goto` is not supported")),
            Some("asm") | Some("__asm__") => return Err(self.err("inline assembly is not supported")),
            Some(_) if self.peek_at(1).is_punct(":") && !self.is_type_start(self.peek()) => {
                return Err(self.err("statement labels are not supported"))
            }
            _ if self.is_type_start(self.peek()) => {
                let (spec, defined) = self.parse_specifiers()?;
                if spec.is_typedef || !matches!(defined, Defined::Nothing) {
                    return Err(self.err_at(start, "local type definitions are not supported"));
                }
                let vars = self.parse_var_list(&spec)?;
                self.expect(";")?;
                StmtKind::Decl(vars)
            }
            _ => {
                let e = self.parse_expr()?;
                self.expect(";")?;
                StmtKind::Expr(e)
            }
        };
        Ok(Stmt {
            kind,
            span: Span::new(start, self.prev_end()),
            annots,
        })
    }

    // --------------------------------------------------------------- expressions

    pub(crate) fn parse_expr(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.parse_assign()?;
        while self.peek().is_punct(",") {
            self.bump();
            let r = self.parse_assign()?;
            let span = e.span.to(r.span);
            e = Expr {
                kind: ExprKind::Comma(Box::new(e), Box::new(r)),
                span,
            };
        }
        Ok(e)
    }

    fn parse_assign(&mut self) -> Result<Expr, ParseError> {
        let lhs = self.parse_cond()?;
        let t = self.peek().clone();
        let op = match &t.kind {
            TokKind::Punct("=") => Some(None),
            TokKind::Punct(p) if p.len() >= 2 && p.ends_with('=') && !matches!(*p, "==" | "!=" | "<=" | ">=") => {
                Some(BinOp::from_symbol(&p[..p.len() - 1]))
            }
            _ => None,
        };
        if let Some(op) = op {
            self.bump();
            let rhs = self.parse_assign()?;
            let span = lhs.span.to(rhs.span);
            return Ok(Expr {
                kind: ExprKind::Assign {
                    op,
                    op_span: t.span,
                    lhs: Box::new(lhs),
                    rhs: Box::new(rhs),
                },
                span,
            });
        }
        Ok(lhs)
    }

    fn parse_cond(&mut self) -> Result<Expr, ParseError> {
        let c = self.parse_binary(0)?;
        if self.eat("?") {
            let a = self.parse_expr()?;
            self.expect(":")?;
            let b = self.parse_cond()?;
            let span = c.span.to(b.span);
            return Ok(Expr {
                kind: ExprKind::Cond(Box::new(c), Box::new(a), Box::new(b)),
                span,
            });
        }
        Ok(c)
    }

    fn parse_binary(&mut self, min_prec: u8) -> Result<Expr, ParseError> {
        let mut lhs = self.parse_unary()?;
        loop {
            let t = self.peek().clone();
            let Some(op) = (match &t.kind {
                TokKind::Punct(p) => BinOp::from_symbol(p),
                _ => None,
            }) else {
                break;
            };
            let prec = precedence(op);
            if prec < min_prec {
                break;
            }
            self.bump();
            let rhs = self.parse_binary(prec + 1)?;
            let span = lhs.span.to(rhs.span);
            lhs = Expr {
                kind: ExprKind::Binary {
                    op,
                    op_span: t.span,
                    lhs: Box::new(lhs),
                    rhs: Box::new(rhs),
                },
                span,
            };
        }
        Ok(lhs)
    }

    fn parse_type_name(&mut self) -> Result<TypeSpec, ParseError> {
        let (mut spec, _) = self.parse_specifiers()?;
        let d = self.parse_declarator(true)?;
        if d.name.is_some() || d.params.is_some() {
            return Err(self.err("malformed type name"));
        }
        spec.ty = self.apply_declarator(spec.ty.clone(), &d)?;
        spec.span = Span::new(spec.span.start, self.prev_end());
        Ok(spec)
    }

    fn parse_unary(&mut self) -> Result<Expr, ParseError> {
        let t = self.peek().clone();
        let start = t.span.start;
        if t.is_punct("(") && self.is_type_start(self.peek_at(1)) {
            self.bump();
            let ty = self.parse_type_name()?;
            self.expect(")")?;
            let e = self.parse_unary()?;
            let span = Span::new(start, e.span.end);
            return Ok(Expr {
                kind: ExprKind::Cast(ty, Box::new(e)),
                span,
            });
        }
        if t.is_ident("sizeof") {
            self.bump();
            if self.peek().is_punct("(") && self.is_type_start(self.peek_at(1)) {
                self.bump();
                let ty = self.parse_type_name()?;
                self.expect(")")?;
                return Ok(Expr {
                    kind: ExprKind::SizeofType(ty),
                    span: Span::new(start, self.prev_end()),
                });
            }
            let e = self.parse_unary()?;
            let span = Span::new(start, e.span.end);
            return Ok(Expr {
                kind: ExprKind::SizeofExpr(Box::new(e)),
                span,
            });
        }
        let op = match &t.kind {
            TokKind::Punct("-") => Some(UnOp::Neg),
            TokKind::Punct("+") => Some(UnOp::Plus),
            TokKind::Punct("!") => Some(UnOp::Not),
            TokKind::Punct("~") => Some(UnOp::BitNot),
            TokKind::Punct("*") => Some(UnOp::Deref),
            TokKind::Punct("&") => Some(UnOp::AddrOf),
            TokKind::Punct("++") => Some(UnOp::PreInc),
            TokKind::Punct("--") => Some(UnOp::PreDec),
            _ => None,
        };
        if let Some(op) = op {
            self.bump();
            let operand = self.parse_unary()?;
            let span = Span::new(start, operand.span.end);
            return Ok(Expr {
                kind: ExprKind::Unary {
                    op,
                    op_span: t.span,
                    operand: Box::new(operand),
                },
                span,
            });
        }
        self.parse_postfix()
    }

    fn parse_postfix(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.parse_primary()?;
        loop {
            let t = self.peek().clone();
            if t.is_punct("[") {
                self.bump();
                let idx = self.parse_expr()?;
                self.expect("]")?;
                e = Expr {
                    span: Span::new(e.span.start, self.prev_end()),
                    kind: ExprKind::Index(Box::new(e), Box::new(idx)),
                };
            } else if t.is_punct("(") {
                self.bump();
                let mut args = Vec::new();
                if !self.peek().is_punct(")") {
                    loop {
                        args.push(self.parse_assign()?);
                        if !self.eat(",") {
                            break;
                        }
                    }
                }
                self.expect(")")?;
                e = Expr {
                    span: Span::new(e.span.start, self.prev_end()),
                    kind: ExprKind::Call {
                        callee: Box::new(e),
                        args,
                    },
                };
            } else if t.is_punct(".") || t.is_punct("->") {
                self.bump();
                let (field, _) = self.expect_ident()?;
                e = Expr {
                    span: Span::new(e.span.start, self.prev_end()),
                    kind: ExprKind::Member {
                        base: Box::new(e),
                        field,
                        arrow: t.is_punct("->"),
                    },
                };
            } else if t.is_punct("++") || t.is_punct("--") {
                self.bump();
                let op = if t.is_punct("++") { UnOp::PostInc } else { UnOp::PostDec };
                e = Expr {
                    span: Span::new(e.span.start, self.prev_end()),
                    kind: ExprKind::Unary {
                        op,
                        op_span: t.span,
                        operand: Box::new(e),
                    },
                };
            } else {
                break;
            }
        }
        Ok(e)
    }

    fn parse_primary(&mut self) -> Result<Expr, ParseError> {
        let t = self.peek().clone();
        let kind = match &t.kind {
            TokKind::Int(v) => ExprKind::Int(*v),
            TokKind::Char(v) => ExprKind::Char(*v),
            TokKind::Float(v) => ExprKind::Float(*v),
            TokKind::Str(s) => {
                let mut s = s.clone();
                self.bump();
                while let TokKind::Str(more) = &self.peek().kind {
                    s.push_str(more);
                    self.bump();
                }
                return Ok(Expr {
                    kind: ExprKind::Str(s),
                    span: Span::new(t.span.start, self.prev_end()),
                });
            }
            TokKind::Ident(s) if !is_keyword(s) => ExprKind::Ident(s.clone()),
            TokKind::Punct("(") => {
                self.bump();
                let mut e = self.parse_expr()?;
                self.expect(")")?;
                e.span = Span::new(t.span.start, self.prev_end());
                return Ok(e);
            }
            _ => return Err(self.err(format!("expected expression, found {}", self.describe()))),
        };
        self.bump();
        Ok(Expr { kind, span: t.span })
    }
}

#[derive(Debug)]
enum Defined {
    Nothing,
    Record {
        tag: String,
        union: bool,
    },
    Enum {
        tag: Option<String>,
        enumerators: Vec<Enumerator>,
    },
}

fn precedence(op: BinOp) -> u8 {
    use BinOp::*;
    match op {
        Or => 1,
        And => 2,
        BitOr => 3,
        BitXor => 4,
        BitAnd => 5,
        Eq | Ne => 6,
        Lt | Le | Gt | Ge => 7,
        Shl | Shr => 8,
        Add | Sub => 9,
        Mul | Div | Rem => 10,
    }
}

fn resolve_keywords(kws: &[String]) -> Option<CType> {
    if kws.is_empty() {
        return None;
    }
    let count = |k: &str| kws.iter().filter(|s| *s == k).count();
    let unsigned = count("unsigned") > 0;
    let longs = count("long");
    if count("void") > 0 {
        return Some(CType::Void);
    }
    if count("float") > 0 || count("double") > 0 {
        return Some(CType::Float);
    }
    if count("_Bool") > 0 {
        return Some(CType::Int(IntType::BOOL));
    }
    let bits = if count("char") > 0 {
        8
    } else if count("short") > 0 {
        16
    } else if longs > 0 {
        64
    } else {
        32
    };
    Some(CType::Int(IntType {
        bits,
        signed: !unsigned,
    }))
}

pub(crate) fn collect_idents(e: &Expr, out: &mut Vec<String>) {
    e.walk(&mut |x| match &x.kind {
        ExprKind::Ident(n) => out.push(n.clone()),
        ExprKind::Cast(spec, _) | ExprKind::SizeofType(spec) => out.extend(spec.refs.iter().cloned()),
        _ => {}
    });
}
