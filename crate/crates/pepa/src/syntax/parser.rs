//! Recursive-descent parser and resolver for the model text format.

use super::lexer::{tokenize, LexError, Pos, Token, TokenKind};
use super::{
    ActionId, ActionTable, GroupLeaf, GroupedModel, LocalTransition, PartitionHints,
    SequentialComponent, SizeClass, SystemEquation, Warning,
};
use crate::rates::RateExpr;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ParseError {
    #[error(transparent)]
    Lex(#[from] LexError),
    #[error("{pos}: syntax error: expected {expected}, found {found}")]
    Syntax {
        pos: Pos,
        expected: String,
        found: String,
    },
    #[error("{pos}: undefined constant `{name}`")]
    UndefinedConstant { pos: Pos, name: String },
    #[error("{pos}: duplicate definition of `{name}`")]
    DuplicateDefinition { pos: Pos, name: String },
    #[error("{pos}: duplicate group label `{label}`")]
    DuplicateGroup { pos: Pos, label: String },
    #[error("{pos}: rate must be positive, got {value}")]
    NonPositiveRate { pos: Pos, value: f64 },
    #[error("{pos}: passive weight must be a positive integer, got {value}")]
    BadPassiveWeight { pos: Pos, value: f64 },
    #[error("{pos}: population must be a non-negative integer, got {value}")]
    BadPopulation { pos: Pos, value: f64 },
    #[error("{pos}: threshold must be a non-negative integer")]
    BadThreshold { pos: Pos },
    #[error("circular definition involving `{name}`")]
    CircularDefinition { name: String },
    #[error("component `{component}` mixes active and passive rates for action `{action}`")]
    MixedPassivity { component: String, action: String },
    #[error("group `{group}`: passive action `{action}` has no enclosing cooperation set naming it")]
    UnsynchronisedPassive { group: String, action: String },
    #[error("group `{label}` has no instances")]
    EmptyGroup { label: String },
    #[error("{pos}: unknown group label `{label}` in size declaration")]
    UnknownGroupLabel { pos: Pos, label: String },
    #[error("model has no system equation")]
    MissingSystem,
    #[error("override `{name}` does not match any constant in the rates block")]
    UnknownOverride { name: String },
}

/// Parse a model file into a resolved [`GroupedModel`].
pub fn parse_model(text: &str) -> Result<GroupedModel, ParseError> {
    parse_model_with_overrides(text, &[])
}

/// Parse with `rates`-block constants replaced by the given values before
/// resolution. Every override must name an existing constant.
pub fn parse_model_with_overrides(
    text: &str,
    overrides: &[(&str, f64)],
) -> Result<GroupedModel, ParseError> {
    let tokens = tokenize(text)?;
    let raw = Parser { tokens, pos: 0 }.parse_file()?;
    resolve(raw, overrides)
}

// ---------------------------------------------------------------------------
// Raw syntax tree
// ---------------------------------------------------------------------------

struct RawModel {
    constants: Vec<(String, f64, Pos)>,
    definitions: Vec<RawDef>,
    system: Option<RawEquation>,
    sizes: Vec<(String, SizeClass, Pos)>,
    threshold: Option<u64>,
}

struct RawDef {
    name: String,
    pos: Pos,
    rhs: RawRhs,
}

enum RawRhs {
    Alias(String, Pos),
    Prefixes(Vec<RawPrefix>),
}

struct RawPrefix {
    action: String,
    rate: RawRate,
    target: String,
    target_pos: Pos,
}

enum RawRate {
    Number(f64, Pos),
    Constant(String, Pos),
    Passive { weight: Option<RawCount> },
}

enum RawCount {
    Literal(f64, Pos),
    Constant(String, Pos),
}

enum RawEquation {
    Coop {
        left: Box<RawEquation>,
        right: Box<RawEquation>,
        actions: Vec<String>,
    },
    Group {
        label: String,
        pos: Pos,
        populations: Vec<(String, Pos, Option<RawCount>)>,
    },
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, expected: &str) -> Result<T, ParseError> {
        let t = self.peek();
        Err(ParseError::Syntax {
            pos: t.pos,
            expected: expected.to_owned(),
            found: t.kind.to_string(),
        })
    }

    fn expect(&mut self, kind: TokenKind, expected: &str) -> Result<Token, ParseError> {
        if self.peek().kind == kind {
            Ok(self.bump())
        } else {
            self.error(expected)
        }
    }

    fn expect_ident(&mut self, expected: &str) -> Result<(String, Pos), ParseError> {
        match self.peek().kind.clone() {
            TokenKind::Ident(name) => {
                let pos = self.bump().pos;
                Ok((name, pos))
            }
            _ => self.error(expected),
        }
    }

    fn parse_file(mut self) -> Result<RawModel, ParseError> {
        let mut raw = RawModel {
            constants: Vec::new(),
            definitions: Vec::new(),
            system: None,
            sizes: Vec::new(),
            threshold: None,
        };
        loop {
            match self.peek().kind.clone() {
                TokenKind::Eof => return Ok(raw),
                TokenKind::Ident(word) => match word.as_str() {
                    "rates" => self.parse_rates_block(&mut raw)?,
                    "system" => {
                        self.bump();
                        self.expect(TokenKind::Equals, "`=` after `system`")?;
                        let eq = self.parse_coop_expr()?;
                        self.expect(TokenKind::Semicolon, "`;` after system equation")?;
                        raw.system = Some(eq);
                    }
                    "small" | "large" => {
                        let class = if word == "small" { SizeClass::Small } else { SizeClass::Large };
                        self.bump();
                        loop {
                            let (label, pos) = self.expect_ident("group label")?;
                            raw.sizes.push((label, class, pos));
                            if self.peek().kind == TokenKind::Comma {
                                self.bump();
                            } else {
                                break;
                            }
                        }
                        self.expect(TokenKind::Semicolon, "`;` after size declaration")?;
                    }
                    "threshold" => {
                        self.bump();
                        let t = self.peek().clone();
                        match t.kind {
                            TokenKind::Number(v) if v >= 0.0 && v.fract() == 0.0 => {
                                self.bump();
                                raw.threshold = Some(v as u64);
                            }
                            _ => return Err(ParseError::BadThreshold { pos: t.pos }),
                        }
                        self.expect(TokenKind::Semicolon, "`;` after threshold")?;
                    }
                    _ => {
                        let def = self.parse_definition()?;
                        raw.definitions.push(def);
                    }
                },
                _ => return self.error("definition, `rates`, `system`, `small`, `large` or `threshold`"),
            }
        }
    }

    fn parse_rates_block(&mut self, raw: &mut RawModel) -> Result<(), ParseError> {
        self.bump(); // `rates`
        self.expect(TokenKind::LBrace, "`{` after `rates`")?;
        while self.peek().kind != TokenKind::RBrace {
            let (name, pos) = self.expect_ident("constant name")?;
            self.expect(TokenKind::Equals, "`=` in rate binding")?;
            let value = match self.peek().kind {
                TokenKind::Number(v) => {
                    self.bump();
                    v
                }
                _ => return self.error("numeric value"),
            };
            self.expect(TokenKind::Semicolon, "`;` after rate binding")?;
            raw.constants.push((name, value, pos));
        }
        self.bump(); // `}`
        Ok(())
    }

    fn parse_definition(&mut self) -> Result<RawDef, ParseError> {
        let (name, pos) = self.expect_ident("definition name")?;
        self.expect(TokenKind::Equals, "`=` in definition")?;
        let rhs = match self.peek().kind.clone() {
            TokenKind::Ident(alias) => {
                let apos = self.bump().pos;
                RawRhs::Alias(alias, apos)
            }
            TokenKind::LParen => {
                let mut prefixes = vec![self.parse_prefix()?];
                while self.peek().kind == TokenKind::Plus {
                    self.bump();
                    prefixes.push(self.parse_prefix()?);
                }
                RawRhs::Prefixes(prefixes)
            }
            _ => return self.error("`(` or constant name"),
        };
        self.expect(TokenKind::Semicolon, "`;` after definition")?;
        Ok(RawDef { name, pos, rhs })
    }

    fn parse_prefix(&mut self) -> Result<RawPrefix, ParseError> {
        self.expect(TokenKind::LParen, "`(`")?;
        let (action, _) = self.expect_ident("action type")?;
        self.expect(TokenKind::Comma, "`,` between action and rate")?;
        let rate = self.parse_rate()?;
        self.expect(TokenKind::RParen, "`)`")?;
        self.expect(TokenKind::Dot, "`.` after activity")?;
        let (target, target_pos) = self.expect_ident("target state")?;
        Ok(RawPrefix {
            action,
            rate,
            target,
            target_pos,
        })
    }

    /// `T`, `w*T`, a number, or a constant name (`w` a literal or constant).
    fn parse_rate(&mut self) -> Result<RawRate, ParseError> {
        let first = self.peek().clone();
        match first.kind {
            TokenKind::Ident(name) if name == "T" => {
                self.bump();
                Ok(RawRate::Passive { weight: None })
            }
            TokenKind::Ident(name) => {
                self.bump();
                if self.peek().kind == TokenKind::Star {
                    self.bump();
                    let (t, _) = self.expect_ident("`T`")?;
                    if t != "T" {
                        return self.error("`T`");
                    }
                    Ok(RawRate::Passive {
                        weight: Some(RawCount::Constant(name, first.pos)),
                    })
                } else {
                    Ok(RawRate::Constant(name, first.pos))
                }
            }
            TokenKind::Number(v) => {
                self.bump();
                if self.peek().kind == TokenKind::Star {
                    self.bump();
                    let (t, _) = self.expect_ident("`T`")?;
                    if t != "T" {
                        return self.error("`T`");
                    }
                    Ok(RawRate::Passive {
                        weight: Some(RawCount::Literal(v, first.pos)),
                    })
                } else {
                    Ok(RawRate::Number(v, first.pos))
                }
            }
            _ => self.error("rate"),
        }
    }

    /// Left-associative chain of cooperations: `term <a,b> term || term ...`.
    fn parse_coop_expr(&mut self) -> Result<RawEquation, ParseError> {
        let mut node = self.parse_coop_term()?;
        loop {
            match self.peek().kind {
                TokenKind::Lt => {
                    self.bump();
                    let mut actions = Vec::new();
                    if self.peek().kind != TokenKind::Gt {
                        loop {
                            let (a, _) = self.expect_ident("action type")?;
                            actions.push(a);
                            if self.peek().kind == TokenKind::Comma {
                                self.bump();
                            } else {
                                break;
                            }
                        }
                    }
                    self.expect(TokenKind::Gt, "`>` closing cooperation set")?;
                    let right = self.parse_coop_term()?;
                    node = RawEquation::Coop {
                        left: Box::new(node),
                        right: Box::new(right),
                        actions,
                    };
                }
                TokenKind::ParPar => {
                    self.bump();
                    let right = self.parse_coop_term()?;
                    node = RawEquation::Coop {
                        left: Box::new(node),
                        right: Box::new(right),
                        actions: Vec::new(),
                    };
                }
                _ => return Ok(node),
            }
        }
    }

    fn parse_coop_term(&mut self) -> Result<RawEquation, ParseError> {
        match self.peek().kind.clone() {
            TokenKind::LParen => {
                self.bump();
                let inner = self.parse_coop_expr()?;
                self.expect(TokenKind::RParen, "`)`")?;
                Ok(inner)
            }
            TokenKind::Ident(label) => {
                let pos = self.bump().pos;
                self.expect(TokenKind::LBrace, "`{` after group label")?;
                let mut populations = Vec::new();
                loop {
                    let (state, spos) = self.expect_ident("local state name")?;
                    let count = if self.peek().kind == TokenKind::LBracket {
                        self.bump();
                        let c = match self.peek().kind.clone() {
                            TokenKind::Number(v) => {
                                let p = self.bump().pos;
                                RawCount::Literal(v, p)
                            }
                            TokenKind::Ident(name) => {
                                let p = self.bump().pos;
                                RawCount::Constant(name, p)
                            }
                            _ => return self.error("population count"),
                        };
                        self.expect(TokenKind::RBracket, "`]`")?;
                        Some(c)
                    } else {
                        None
                    };
                    populations.push((state, spos, count));
                    if self.peek().kind == TokenKind::ParPar {
                        self.bump();
                    } else {
                        break;
                    }
                }
                self.expect(TokenKind::RBrace, "`}` closing group")?;
                Ok(RawEquation::Group {
                    label,
                    pos,
                    populations,
                })
            }
            _ => self.error("group or `(`"),
        }
    }
}

// ---------------------------------------------------------------------------
// Resolution
// ---------------------------------------------------------------------------

struct Resolver {
    constants: HashMap<String, f64>,
    definitions: HashMap<String, Vec<ResolvedPrefix>>,
    actions: ActionTable,
}

#[derive(Clone)]
struct ResolvedPrefix {
    action: ActionId,
    rate: RateExpr,
    target: String,
    target_pos: Pos,
}

fn resolve(raw: RawModel, overrides: &[(&str, f64)]) -> Result<GroupedModel, ParseError> {
    let mut constants = HashMap::new();
    let mut const_pos = HashMap::new();
    for (name, value, pos) in &raw.constants {
        if constants.insert(name.clone(), *value).is_some() {
            return Err(ParseError::DuplicateDefinition {
                pos: *pos,
                name: name.clone(),
            });
        }
        const_pos.insert(name.clone(), *pos);
    }
    for (name, value) in overrides {
        if !constants.contains_key(*name) {
            return Err(ParseError::UnknownOverride {
                name: (*name).to_owned(),
            });
        }
        constants.insert((*name).to_owned(), *value);
    }

    // Definitions: resolve aliases transitively, rates to values.
    let mut definition_order = Vec::new();
    let mut alias_of = HashMap::new();
    let mut raw_defs = HashMap::new();
    for def in &raw.definitions {
        if raw_defs.contains_key(&def.name) || alias_of.contains_key(&def.name) {
            return Err(ParseError::DuplicateDefinition {
                pos: def.pos,
                name: def.name.clone(),
            });
        }
        definition_order.push(def.name.clone());
        match &def.rhs {
            RawRhs::Alias(target, pos) => {
                alias_of.insert(def.name.clone(), (target.clone(), *pos));
            }
            RawRhs::Prefixes(prefixes) => {
                raw_defs.insert(def.name.clone(), prefixes);
            }
        }
    }
    let resolve_alias = |name: &str, pos: Pos| -> Result<String, ParseError> {
        let mut seen = HashSet::new();
        let mut cur = name.to_owned();
        let mut cur_pos = pos;
        while let Some((next, npos)) = alias_of.get(&cur) {
            if !seen.insert(cur.clone()) {
                return Err(ParseError::CircularDefinition { name: cur });
            }
            cur = next.clone();
            cur_pos = *npos;
        }
        if raw_defs.contains_key(&cur) {
            Ok(cur)
        } else {
            Err(ParseError::UndefinedConstant {
                pos: cur_pos,
                name: cur,
            })
        }
    };

    let mut resolver = Resolver {
        constants,
        definitions: HashMap::new(),
        actions: ActionTable::default(),
    };
    let resolve_count = |constants: &HashMap<String, f64>, c: &RawCount| -> Result<u64, ParseError> {
        let (value, pos) = match c {
            RawCount::Literal(v, p) => (*v, *p),
            RawCount::Constant(name, p) => (
                *constants.get(name).ok_or(ParseError::UndefinedConstant {
                    pos: *p,
                    name: name.clone(),
                })?,
                *p,
            ),
        };
        if value < 0.0 || value.fract() != 0.0 {
            return Err(ParseError::BadPopulation { pos, value });
        }
        Ok(value as u64)
    };

    for def in &raw.definitions {
        let RawRhs::Prefixes(prefixes) = &def.rhs else { continue };
        let mut resolved = Vec::new();
        for p in prefixes {
            let rate = match &p.rate {
                RawRate::Number(v, pos) => {
                    if *v <= 0.0 {
                        return Err(ParseError::NonPositiveRate { pos: *pos, value: *v });
                    }
                    RateExpr::Active(*v)
                }
                RawRate::Constant(name, pos) => {
                    let v = *resolver
                        .constants
                        .get(name)
                        .ok_or(ParseError::UndefinedConstant {
                            pos: *pos,
                            name: name.clone(),
                        })?;
                    if v <= 0.0 {
                        return Err(ParseError::NonPositiveRate { pos: *pos, value: v });
                    }
                    RateExpr::Active(v)
                }
                RawRate::Passive { weight: None } => RateExpr::Passive(1),
                RawRate::Passive { weight: Some(w) } => {
                    let (value, pos) = match w {
                        RawCount::Literal(v, p) => (*v, *p),
                        RawCount::Constant(name, p) => (
                            *resolver.constants.get(name).ok_or(ParseError::UndefinedConstant {
                                pos: *p,
                                name: name.clone(),
                            })?,
                            *p,
                        ),
                    };
                    if value < 1.0 || value.fract() != 0.0 {
                        return Err(ParseError::BadPassiveWeight { pos, value });
                    }
                    RateExpr::Passive(value as u64)
                }
            };
            let target = resolve_alias(&p.target, p.target_pos)?;
            resolved.push(ResolvedPrefix {
                action: resolver.actions.intern(&p.action),
                rate,
                target,
                target_pos: p.target_pos,
            });
        }
        resolver.definitions.insert(def.name.clone(), resolved);
    }

    // System equation.
    let raw_system = raw.system.ok_or(ParseError::MissingSystem)?;
    let mut components: BTreeMap<String, SequentialComponent> = BTreeMap::new();
    let mut labels_seen = HashSet::new();
    let equation = build_equation(
        &raw_system,
        &mut resolver,
        &mut components,
        &mut labels_seen,
        &resolve_alias,
        &resolve_count,
    )?;

    // Sizing hints.
    let mut hints = PartitionHints {
        classes: BTreeMap::new(),
        threshold: raw.threshold,
    };
    for (label, class, pos) in &raw.sizes {
        if !equation.contains_group(label) {
            return Err(ParseError::UnknownGroupLabel {
                pos: *pos,
                label: label.clone(),
            });
        }
        hints.classes.insert(label.clone(), *class);
    }

    let mut model = GroupedModel {
        actions: resolver.actions,
        components,
        equation,
        hints,
        warnings: Vec::new(),
        definition_order,
    };
    validate(&mut model)?;
    Ok(model)
}

type AliasResolver<'a> = &'a dyn Fn(&str, Pos) -> Result<String, ParseError>;
type CountResolver<'a> = &'a dyn Fn(&HashMap<String, f64>, &RawCount) -> Result<u64, ParseError>;

fn build_equation(
    raw: &RawEquation,
    resolver: &mut Resolver,
    components: &mut BTreeMap<String, SequentialComponent>,
    labels_seen: &mut HashSet<String>,
    resolve_alias: AliasResolver,
    resolve_count: CountResolver,
) -> Result<SystemEquation, ParseError> {
    match raw {
        RawEquation::Coop { left, right, actions } => {
            let l = build_equation(left, resolver, components, labels_seen, resolve_alias, resolve_count)?;
            let r = build_equation(right, resolver, components, labels_seen, resolve_alias, resolve_count)?;
            let coop_set: BTreeSet<ActionId> =
                actions.iter().map(|a| resolver.actions.intern(a)).collect();
            Ok(SystemEquation::Coop {
                left: Box::new(l),
                right: Box::new(r),
                coop_set,
            })
        }
        RawEquation::Group { label, pos, populations } => {
            if !labels_seen.insert(label.clone()) {
                return Err(ParseError::DuplicateGroup {
                    pos: *pos,
                    label: label.clone(),
                });
            }
            let mut initials = Vec::new();
            for (state, spos, count) in populations {
                let state = resolve_alias(state, *spos)?;
                let count = match count {
                    Some(c) => resolve_count(&resolver.constants, c)?,
                    None => 1,
                };
                initials.push((state, count));
            }
            let component = build_component(resolver, &initials)?;
            let mut counts = vec![0u64; component.states.len()];
            for (state, count) in &initials {
                let idx = component.state_index(state).expect("initial state is in closure");
                counts[idx] += count;
            }
            if counts.iter().sum::<u64>() == 0 {
                return Err(ParseError::EmptyGroup { label: label.clone() });
            }
            let name = component.name.clone();
            components.entry(name.clone()).or_insert(component);
            Ok(SystemEquation::Group(GroupLeaf {
                label: label.clone(),
                component: name,
                initial_counts: counts,
            }))
        }
    }
}

/// Derivative-set closure from the listed initial states, in breadth-first
/// discovery order. Identical `(source, action, target)` activities merge by
/// rate summation.
fn build_component(
    resolver: &Resolver,
    initials: &[(String, u64)],
) -> Result<SequentialComponent, ParseError> {
    let mut states: Vec<String> = Vec::new();
    let mut queue: Vec<String> = Vec::new();
    for (s, _) in initials {
        if !states.contains(s) {
            states.push(s.clone());
            queue.push(s.clone());
        }
    }
    let name = states[0].clone();
    let mut transitions: Vec<LocalTransition> = Vec::new();
    let mut head = 0;
    while head < queue.len() {
        let state = queue[head].clone();
        head += 1;
        let from = states.iter().position(|s| *s == state).unwrap();
        let prefixes = resolver.definitions.get(&state).expect("state resolved");
        for p in prefixes {
            let target = resolve_target(resolver, &p.target, p.target_pos)?;
            let to = match states.iter().position(|s| *s == target) {
                Some(i) => i,
                None => {
                    states.push(target.clone());
                    queue.push(target);
                    states.len() - 1
                }
            };
            merge_transition(&mut transitions, from, p.action, p.rate, to, &name, resolver)?;
        }
    }
    transitions.sort_by_key(|t| (t.from, t.action, t.to));
    Ok(SequentialComponent {
        name,
        states,
        transitions,
    })
}

fn resolve_target(resolver: &Resolver, target: &str, pos: Pos) -> Result<String, ParseError> {
    if resolver.definitions.contains_key(target) {
        Ok(target.to_owned())
    } else {
        Err(ParseError::UndefinedConstant {
            pos,
            name: target.to_owned(),
        })
    }
}

fn merge_transition(
    transitions: &mut Vec<LocalTransition>,
    from: usize,
    action: ActionId,
    rate: RateExpr,
    to: usize,
    component: &str,
    resolver: &Resolver,
) -> Result<(), ParseError> {
    if let Some(existing) = transitions
        .iter_mut()
        .find(|t| t.from == from && t.action == action && t.to == to)
    {
        existing.rate = match (existing.rate, rate) {
            (RateExpr::Active(a), RateExpr::Active(b)) => RateExpr::Active(a + b),
            (RateExpr::Passive(a), RateExpr::Passive(b)) => RateExpr::Passive(a + b),
            _ => {
                return Err(ParseError::MixedPassivity {
                    component: component.to_owned(),
                    action: resolver.actions.name(action).to_owned(),
                })
            }
        };
    } else {
        transitions.push(LocalTransition {
            from,
            action,
            rate,
            to,
        });
    }
    Ok(())
}

fn validate(model: &mut GroupedModel) -> Result<(), ParseError> {
    // Per-component, per-action passivity must be uniform.
    for component in model.components.values() {
        let mut kinds: BTreeMap<ActionId, bool> = BTreeMap::new();
        for t in &component.transitions {
            let passive = t.rate.is_passive();
            if *kinds.entry(t.action).or_insert(passive) != passive {
                return Err(ParseError::MixedPassivity {
                    component: component.name.clone(),
                    action: model.actions.name(t.action).to_owned(),
                });
            }
        }
    }

    // Every passive action of a group's component must be named by a
    // cooperation set on the group's root-to-leaf path.
    let mut path_sets: BTreeMap<String, BTreeSet<ActionId>> = BTreeMap::new();
    collect_path_sets(&model.equation, &BTreeSet::new(), &mut path_sets);
    for leaf in model.equation.leaves() {
        let component = &model.components[&leaf.component];
        let interface = &path_sets[&leaf.label];
        for action in component.passive_actions() {
            if !interface.contains(&action) {
                return Err(ParseError::UnsynchronisedPassive {
                    group: leaf.label.clone(),
                    action: model.actions.name(action).to_owned(),
                });
            }
        }
    }

    // Warnings: unreachable definitions and cooperation sets that can never
    // synchronise (an action missing from one side's enabled set, or both).
    let mut reachable: HashSet<&str> = HashSet::new();
    for c in model.components.values() {
        for s in &c.states {
            reachable.insert(s);
        }
    }
    let mut warnings = Vec::new();
    for name in &model.definition_order {
        if !reachable.contains(name.as_str()) {
            warnings.push(Warning::UnreachableDefinition { name: name.clone() });
        }
    }
    collect_inert_warnings(model, &model.equation, &mut warnings);
    model.warnings = warnings;
    Ok(())
}

fn collect_path_sets(
    node: &SystemEquation,
    acc: &BTreeSet<ActionId>,
    out: &mut BTreeMap<String, BTreeSet<ActionId>>,
) {
    match node {
        SystemEquation::Coop { left, right, coop_set } => {
            let mut acc2 = acc.clone();
            acc2.extend(coop_set.iter().copied());
            collect_path_sets(left, &acc2, out);
            collect_path_sets(right, &acc2, out);
        }
        SystemEquation::Group(leaf) => {
            out.insert(leaf.label.clone(), acc.clone());
        }
    }
}

fn collect_inert_warnings(model: &GroupedModel, node: &SystemEquation, out: &mut Vec<Warning>) {
    if let SystemEquation::Coop { left, right, coop_set } = node {
        let enabled = |side: &SystemEquation| -> BTreeSet<ActionId> {
            side.leaves()
                .iter()
                .flat_map(|l| model.components[&l.component].enabled_actions())
                .collect()
        };
        let l = enabled(left);
        let r = enabled(right);
        for action in coop_set {
            if !(l.contains(action) && r.contains(action)) {
                out.push(Warning::InertCooperation {
                    action: model.actions.name(*action).to_owned(),
                });
            }
        }
        collect_inert_warnings(model, left, out);
        collect_inert_warnings(model, right, out);
    }
}
