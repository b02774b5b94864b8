//! Text grammar for scene states.
//!
//! ```text
//! state     = graspType "|" bindings "|" config ;
//! graspType = unitRun { "+" unitRun } ;
//! unitRun   = [ INT ] unit ;             INT >= 2 replicates the unit
//! unit      = geom [ geom ] ;
//! geom      = ( "P" | "L" | "Pi" ) [ "e" ] ;
//! bindings  = "-" | binding { "+" binding } ;
//! binding   = LOC [ "_" INT ] [ "@" ( "LH" | "RH" ) ] ;
//! config    = "Crumpled" | "Flat" | "Folded" | "SemiFolded" | "SemiFlat" ;
//! ```
//!
//! Whitespace around tokens is ignored and tokens are case-sensitive. `Π`
//! is read as `Pi`. The lenient reader additionally accepts `,` or `-` as
//! the field separator, a surrounding pair of parentheses, `_e` as the
//! extrinsic suffix, and hyphenated configuration names such as
//! `Semi-Folded`, so states copied from prose parse unchanged.

use std::str::FromStr;

use thiserror::Error;

use crate::model::{
    ClothConfig, GraspBinding, GraspGeometry, GraspType, GraspUnit, Hand, Layer, Location,
    SceneState, Shape,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: expected {}, found {found}", expected.join(" or "))]
    Syntax {
        offset: usize,
        expected: Vec<String>,
        found: String,
    },
    #[error("unknown grasp geometry `{token}` at byte {offset}")]
    UnknownGeometry { offset: usize, token: String },
    #[error("unknown location `{token}` at byte {offset}{}", suggestion.as_ref().map(|s| format!(" (did you mean `{s}`?)")).unwrap_or_default())]
    UnknownLocation {
        offset: usize,
        token: String,
        suggestion: Option<String>,
    },
    #[error("unknown cloth configuration `{token}` at byte {offset}")]
    UnknownConfig { offset: usize, token: String },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. }
            | ParseError::UnknownGeometry { offset, .. }
            | ParseError::UnknownLocation { offset, .. }
            | ParseError::UnknownConfig { offset, .. } => *offset,
        }
    }

    fn syntax(offset: usize, expected: &[&str], rest: &str) -> Self {
        ParseError::Syntax {
            offset,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: describe(rest),
        }
    }
}

fn describe(rest: &str) -> String {
    match rest.chars().next() {
        Some(c) => format!("`{c}`"),
        None => "end of input".to_string(),
    }
}

/// Grasp-location tokens accepted by the parser.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Vocabulary {
    extras: Vec<String>,
}

/// Upper bound on a run-length prefix such as `2PP`.
pub const MAX_UNIT_COUNT: usize = 64;

const BUILTIN_LOCATIONS: [&str; 5] = ["LC", "RC", "FL", "FR", "I"];

impl Vocabulary {
    /// Extends the default `LC RC FL FR I` set. Extra tokens sort after the
    /// built-ins in the order given here; duplicates and built-in names are
    /// ignored.
    pub fn with_extras<I, S>(extras: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut v = Vocabulary::default();
        for e in extras {
            let e = e.into();
            if !BUILTIN_LOCATIONS.contains(&e.as_str()) && !v.extras.contains(&e) && is_ident(&e) {
                v.extras.push(e);
            }
        }
        v
    }

    /// Extra tokens by rank; `None` leaves the rank unused.
    pub(crate) fn from_slots(slots: impl IntoIterator<Item = Option<String>>) -> Self {
        Self {
            extras: slots.into_iter().map(Option::unwrap_or_default).collect(),
        }
    }

    pub fn extras(&self) -> &[String] {
        &self.extras
    }

    pub fn lookup(&self, token: &str) -> Option<Location> {
        Some(match token {
            "LC" => Location::LeftCorner,
            "RC" => Location::RightCorner,
            "FL" => Location::FarLeft,
            "FR" => Location::FarRight,
            "I" => Location::Interior,
            _ => {
                let rank = self.extras.iter().position(|e| e == token)?;
                Location::Extra {
                    rank: rank as u32,
                    token: token.to_string(),
                }
            }
        })
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        BUILTIN_LOCATIONS
            .iter()
            .copied()
            .chain(self.extras.iter().map(String::as_str).filter(|t| !t.is_empty()))
    }
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric())
}

/// Configurable state reader.
#[derive(Debug, Clone, Default)]
pub struct StateParser {
    pub vocabulary: Vocabulary,
    pub lenient: bool,
}

impl StateParser {
    pub fn new(vocabulary: Vocabulary) -> Self {
        Self {
            vocabulary,
            lenient: false,
        }
    }

    pub fn lenient(mut self, lenient: bool) -> Self {
        self.lenient = lenient;
        self
    }

    pub fn parse_state(&self, text: &str) -> Result<SceneState, ParseError> {
        let [gt, bd, cc] = self.split_fields(text)?;
        let grasp_type = self.grasp_type_field(gt)?;
        let bindings = self.bindings_field(bd)?;
        let config = self.config_field(cc)?;
        Ok(SceneState::new(grasp_type, bindings, config))
    }

    pub fn parse_grasp_type(&self, text: &str) -> Result<GraspType, ParseError> {
        self.grasp_type_field(Field { start: 0, text })
    }

    pub fn parse_binding(&self, text: &str) -> Result<GraspBinding, ParseError> {
        let mut cur = Cursor::new(Field { start: 0, text });
        cur.skip_ws();
        let b = self.binding(&mut cur)?;
        cur.skip_ws();
        cur.expect_end(&["`_`", "`@`", "end of binding"])?;
        Ok(b)
    }

    fn split_fields<'a>(&self, text: &'a str) -> Result<[Field<'a>; 3], ParseError> {
        let (base, inner) = if self.lenient {
            strip_parens(text)
        } else {
            (0, text)
        };
        if !self.lenient || inner.contains('|') {
            return split_on(base, inner, '|');
        }
        if inner.contains(',') {
            return split_on(base, inner, ',');
        }
        split_hyphenated(base, inner)
    }

    fn grasp_type_field(&self, field: Field<'_>) -> Result<GraspType, ParseError> {
        let mut cur = Cursor::new(field);
        let mut units = Vec::new();
        loop {
            cur.skip_ws();
            let count_at = cur.offset();
            let count = cur.take_while(|c| c.is_ascii_digit());
            let copies = if count.is_empty() {
                1
            } else {
                match count.parse::<usize>() {
                    Ok(n) if (2..=MAX_UNIT_COUNT).contains(&n) => n,
                    _ => {
                        return Err(ParseError::Syntax {
                            offset: count_at,
                            expected: vec![format!("unit count in 2..={MAX_UNIT_COUNT}")],
                            found: format!("`{count}`"),
                        })
                    }
                }
            };
            let unit = self.unit(&mut cur)?;
            units.extend(std::iter::repeat_n(unit, copies));
            cur.skip_ws();
            if !cur.eat('+') {
                cur.expect_end(&["`+`", "end of grasp type"])?;
                break;
            }
        }
        // the loop pushes at least one unit before it can exit
        Ok(GraspType::new(units).expect("non-empty grasp type"))
    }

    fn unit(&self, cur: &mut Cursor<'_>) -> Result<GraspUnit, ParseError> {
        let start = cur.pos;
        let word_len = cur.rest().find(|c: char| !is_unit_char(c)).unwrap_or(cur.rest().len());
        let word = &cur.rest()[..word_len];
        if word.is_empty() {
            return Err(ParseError::syntax(cur.offset(), &["`P`", "`L`", "`Pi`"], cur.rest()));
        }
        let unknown = || ParseError::UnknownGeometry {
            offset: cur.field.start + start,
            token: word.to_string(),
        };
        let mut geoms = Vec::with_capacity(2);
        let mut sub = Cursor {
            field: Field {
                start: cur.field.start + start,
                text: word,
            },
            pos: 0,
        };
        while !sub.at_end() {
            if geoms.len() == 2 {
                return Err(unknown());
            }
            geoms.push(self.geom(&mut sub).ok_or_else(unknown)?);
        }
        cur.pos += word_len;
        Ok(match geoms.as_slice() {
            [a] => GraspUnit::single(*a),
            [a, b] => GraspUnit::pair(*a, *b),
            _ => unreachable!("word is non-empty and capped at two geometries"),
        })
    }

    fn geom(&self, cur: &mut Cursor<'_>) -> Option<GraspGeometry> {
        let shape = if cur.eat_str("Pi") || cur.eat('Π') {
            Shape::Plane
        } else if cur.eat('P') {
            Shape::Point
        } else if cur.eat('L') {
            Shape::Line
        } else {
            return None;
        };
        let extrinsic = cur.eat('e') || (self.lenient && cur.eat_str("_e"));
        Some(GraspGeometry::new(shape, extrinsic))
    }

    fn bindings_field(&self, field: Field<'_>) -> Result<Vec<GraspBinding>, ParseError> {
        let mut cur = Cursor::new(field);
        cur.skip_ws();
        if cur.eat('-') {
            cur.skip_ws();
            cur.expect_end(&["end of bindings"])?;
            return Ok(Vec::new());
        }
        let mut out = Vec::new();
        loop {
            cur.skip_ws();
            out.push(self.binding(&mut cur)?);
            cur.skip_ws();
            if !cur.eat('+') {
                cur.expect_end(&["`+`", "`_`", "`@`", "end of bindings"])?;
                break;
            }
        }
        Ok(out)
    }

    fn binding(&self, cur: &mut Cursor<'_>) -> Result<GraspBinding, ParseError> {
        let at = cur.offset();
        let token = cur.ident();
        if token.is_empty() {
            return Err(ParseError::syntax(at, &["location", "`-`"], cur.rest()));
        }
        let location = self
            .vocabulary
            .lookup(token)
            .ok_or_else(|| ParseError::UnknownLocation {
                offset: at,
                token: token.to_string(),
                suggestion: self.suggest_location(token),
            })?;
        let mut binding = GraspBinding::at(location);
        if cur.eat('_') {
            let at = cur.offset();
            let digits = cur.take_while(|c| c.is_ascii_digit());
            match digits.parse::<u32>() {
                Ok(k) if k >= 1 => binding.layer = Layer::Index(k),
                _ => {
                    return Err(ParseError::Syntax {
                        offset: at,
                        expected: vec!["layer index >= 1".into()],
                        found: if digits.is_empty() {
                            describe(cur.rest())
                        } else {
                            format!("`{digits}`")
                        },
                    })
                }
            }
        }
        if cur.eat('@') {
            let at = cur.offset();
            binding.hand = Some(match cur.ident() {
                "LH" => Hand::Left,
                "RH" => Hand::Right,
                other => {
                    return Err(ParseError::Syntax {
                        offset: at,
                        expected: vec!["`LH`".into(), "`RH`".into()],
                        found: if other.is_empty() {
                            describe(cur.rest())
                        } else {
                            format!("`{other}`")
                        },
                    })
                }
            });
        }
        Ok(binding)
    }

    /// The lenient reader points out `RL`, which appears in prose where `RC`
    /// is meant. It never substitutes the token.
    fn suggest_location(&self, token: &str) -> Option<String> {
        if self.lenient && token == "RL" && self.vocabulary.lookup("RL").is_none() {
            Some("RC".to_string())
        } else {
            None
        }
    }

    fn config_field(&self, field: Field<'_>) -> Result<ClothConfig, ParseError> {
        let lead = field.text.len() - field.text.trim_start().len();
        let token = field.text.trim();
        let offset = field.start + lead;
        if token.is_empty() {
            let expected: Vec<&str> = ClothConfig::ALL.iter().map(|c| c.token()).collect();
            return Err(ParseError::syntax(offset, &expected, ""));
        }
        let found = if self.lenient {
            let folded: String = token.chars().filter(|c| *c != '-').collect();
            ClothConfig::ALL
                .into_iter()
                .find(|c| c.token().eq_ignore_ascii_case(&folded))
        } else {
            ClothConfig::from_token(token)
        };
        found.ok_or_else(|| ParseError::UnknownConfig {
            offset,
            token: token.to_string(),
        })
    }
}

fn is_unit_char(c: char) -> bool {
    c.is_alphanumeric() || c == 'Π' || c == '_'
}

#[derive(Debug, Clone, Copy)]
struct Field<'a> {
    start: usize,
    text: &'a str,
}

struct Cursor<'a> {
    field: Field<'a>,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(field: Field<'a>) -> Self {
        Self { field, pos: 0 }
    }

    fn rest(&self) -> &'a str {
        &self.field.text[self.pos..]
    }

    fn offset(&self) -> usize {
        self.field.start + self.pos
    }

    fn at_end(&self) -> bool {
        self.pos >= self.field.text.len()
    }

    fn skip_ws(&mut self) {
        let rest = self.rest();
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn eat(&mut self, c: char) -> bool {
        if self.rest().starts_with(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn eat_str(&mut self, s: &str) -> bool {
        if self.rest().starts_with(s) {
            self.pos += s.len();
            true
        } else {
            false
        }
    }

    fn take_while(&mut self, pred: impl Fn(char) -> bool) -> &'a str {
        let rest = self.rest();
        let n = rest.find(|c: char| !pred(c)).unwrap_or(rest.len());
        self.pos += n;
        &rest[..n]
    }

    fn ident(&mut self) -> &'a str {
        let rest = self.rest();
        if !rest.starts_with(|c: char| c.is_ascii_alphabetic()) {
            return "";
        }
        self.take_while(|c| c.is_ascii_alphanumeric())
    }

    fn expect_end(&self, expected: &[&str]) -> Result<(), ParseError> {
        if self.at_end() {
            Ok(())
        } else {
            Err(ParseError::syntax(self.offset(), expected, self.rest()))
        }
    }
}

fn strip_parens(text: &str) -> (usize, &str) {
    let lead = text.len() - text.trim_start().len();
    let t = text.trim();
    match t.strip_prefix('(').and_then(|t| t.strip_suffix(')')) {
        Some(inner) => (lead + 1, inner),
        None => (0, text),
    }
}

fn split_on(base: usize, text: &str, sep: char) -> Result<[Field<'_>; 3], ParseError> {
    let mut fields = Vec::with_capacity(3);
    let mut start = 0;
    for (i, c) in text.char_indices() {
        if c == sep {
            if fields.len() == 2 {
                return Err(ParseError::syntax(base + i, &["end of state"], &text[i..]));
            }
            fields.push(Field {
                start: base + start,
                text: &text[start..i],
            });
            start = i + c.len_utf8();
        }
    }
    fields.push(Field {
        start: base + start,
        text: &text[start..],
    });
    if fields.len() < 3 {
        let sep = format!("`{sep}`");
        return Err(ParseError::Syntax {
            offset: base + text.len(),
            expected: vec![sep],
            found: "end of input".into(),
        });
    }
    let mut it = fields.into_iter();
    Ok([it.next().unwrap(), it.next().unwrap(), it.next().unwrap()])
}

/// `2PP-LC+RC-Flat`: the grasp type never contains `-`, so the first hyphen
/// ends it; the configuration is the trailing word, which may itself be a
/// hyphenated `Semi-...` name; whatever lies between is the bindings field,
/// including a lone `-`.
fn split_hyphenated(base: usize, text: &str) -> Result<[Field<'_>; 3], ParseError> {
    let no_sep = || ParseError::Syntax {
        offset: base + text.len(),
        expected: vec!["`|`".into(), "`,`".into(), "`-`".into()],
        found: "end of input".into(),
    };
    let first = text.find('-').ok_or_else(no_sep)?;
    let trimmed_end = text.trim_end().len();
    let mut cfg_search_end = trimmed_end;
    let lower = text[..trimmed_end].to_ascii_lowercase();
    for hyphenated in ["semi-folded", "semi-flat"] {
        if lower.ends_with(hyphenated) {
            cfg_search_end = trimmed_end - hyphenated.len();
        }
    }
    let last = text[..cfg_search_end].rfind('-').ok_or_else(no_sep)?;
    if last <= first {
        return Err(no_sep());
    }
    Ok([
        Field {
            start: base,
            text: &text[..first],
        },
        Field {
            start: base + first + 1,
            text: &text[first + 1..last],
        },
        Field {
            start: base + last + 1,
            text: &text[last + 1..],
        },
    ])
}

/// Strict parse with the default vocabulary.
pub fn parse_state(text: &str) -> Result<SceneState, ParseError> {
    StateParser::default().parse_state(text)
}

pub fn parse_grasp_type(text: &str) -> Result<GraspType, ParseError> {
    StateParser::default().parse_grasp_type(text)
}

pub fn parse_binding(text: &str) -> Result<GraspBinding, ParseError> {
    StateParser::default().parse_binding(text)
}

/// Canonical text of a state.
pub fn serialize_state(s: &SceneState) -> String {
    s.to_string()
}

impl FromStr for SceneState {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_state(s)
    }
}
