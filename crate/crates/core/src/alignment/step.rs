//! Tokenizer and record parser for the ISO 10303-21 subset we emit.

use std::collections::BTreeMap;

use super::AlignmentError;

#[derive(Debug, Clone, PartialEq)]
pub enum StepValue {
    Integer(i64),
    Real(f64),
    String(String),
    Enum(String),
    Ref(u64),
    Omitted,
    Derived,
    List(Vec<StepValue>),
    /// A typed parameter such as `IFCLENGTHMEASURE(1.0)`.
    Typed(String, Vec<StepValue>),
}

impl StepValue {
    /// Numeric value of a real or integer, looking through typed wrappers.
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            StepValue::Real(v) => Some(*v),
            StepValue::Integer(v) => Some(*v as f64),
            StepValue::Typed(_, args) if args.len() == 1 => args[0].as_f64(),
            _ => None,
        }
    }

    pub fn as_ref_id(&self) -> Option<u64> {
        match self {
            StepValue::Ref(id) => Some(*id),
            _ => None,
        }
    }

    pub fn as_enum(&self) -> Option<&str> {
        match self {
            StepValue::Enum(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[StepValue]> {
        match self {
            StepValue::List(v) => Some(v),
            _ => None,
        }
    }

    fn refs(&self, out: &mut Vec<u64>) {
        match self {
            StepValue::Ref(id) => out.push(*id),
            StepValue::List(v) | StepValue::Typed(_, v) => v.iter().for_each(|x| x.refs(out)),
            _ => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepEntity {
    pub id: u64,
    pub name: String,
    pub args: Vec<StepValue>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepFile {
    pub header: Vec<(String, Vec<StepValue>)>,
    pub entities: BTreeMap<u64, StepEntity>,
}

impl StepFile {
    /// Entities of one type, in id order.
    pub fn of_type<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a StepEntity> + 'a {
        self.entities.values().filter(move |e| e.name == name)
    }

    pub fn get(&self, id: u64) -> Option<&StepEntity> {
        self.entities.get(&id)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Keyword(String),
    Id(u64),
    Int(i64),
    Real(f64),
    Str(String),
    Enum(String),
    Dollar,
    Star,
    Open,
    Close,
    Comma,
    Semi,
    Eq,
}

fn err(line: usize, msg: impl std::fmt::Display) -> AlignmentError {
    AlignmentError::Step(format!("line {line}: {msg}"))
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>, AlignmentError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line) = (0, 1);
    while i < chars.len() {
        let c = chars[i];
        let start_line = line;
        match c {
            '\n' => {
                line += 1;
                i += 1;
            }
            c if c.is_whitespace() => i += 1,
            '/' if chars.get(i + 1) == Some(&'*') => {
                i += 2;
                loop {
                    match chars.get(i) {
                        None => return Err(err(start_line, "unterminated comment")),
                        Some('*') if chars.get(i + 1) == Some(&'/') => {
                            i += 2;
                            break;
                        }
                        Some(ch) => {
                            if *ch == '\n' {
                                line += 1;
                            }
                            i += 1;
                        }
                    }
                }
            }
            '\'' => {
                let mut s = String::new();
                i += 1;
                loop {
                    match chars.get(i) {
                        None => return Err(err(start_line, "unterminated string")),
                        Some('\'') if chars.get(i + 1) == Some(&'\'') => {
                            s.push('\'');
                            i += 2;
                        }
                        Some('\'') => {
                            i += 1;
                            break;
                        }
                        Some(ch) => {
                            if *ch == '\n' {
                                line += 1;
                            }
                            s.push(*ch);
                            i += 1;
                        }
                    }
                }
                out.push((Tok::Str(s), start_line));
            }
            '.' if chars.get(i + 1).is_some_and(|ch| ch.is_ascii_alphabetic()) => {
                let end = chars[i + 1..]
                    .iter()
                    .position(|&ch| ch == '.')
                    .ok_or_else(|| err(line, "unterminated enumeration"))?;
                let s: String = chars[i + 1..i + 1 + end].iter().collect();
                if !s.chars().all(|ch| ch.is_ascii_alphanumeric() || ch == '_') {
                    return Err(err(line, format!("bad enumeration .{s}.")));
                }
                out.push((Tok::Enum(s), line));
                i += end + 2;
            }
            '#' => {
                let n = chars[i + 1..].iter().take_while(|ch| ch.is_ascii_digit()).count();
                if n == 0 {
                    return Err(err(line, "bare '#'"));
                }
                let s: String = chars[i + 1..i + 1 + n].iter().collect();
                let id = s.parse().map_err(|_| err(line, format!("bad id #{s}")))?;
                out.push((Tok::Id(id), line));
                i += n + 1;
            }
            '+' | '-' | '0'..='9' => {
                let n = chars[i..]
                    .iter()
                    .enumerate()
                    .take_while(|&(k, ch)| {
                        ch.is_ascii_digit()
                            || matches!(ch, '.' | 'E')
                            || (k == 0 && matches!(ch, '+' | '-'))
                            || (matches!(ch, '+' | '-') && k > 0 && chars[i + k - 1] == 'E')
                    })
                    .count();
                let s: String = chars[i..i + n].iter().collect();
                let tok = if s.contains('.') {
                    Tok::Real(s.parse().map_err(|_| err(line, format!("bad real {s}")))?)
                } else {
                    Tok::Int(s.parse().map_err(|_| err(line, format!("bad integer {s}")))?)
                };
                out.push((tok, line));
                i += n;
            }
            c if c.is_ascii_alphabetic() => {
                let n = chars[i..]
                    .iter()
                    .take_while(|ch| ch.is_ascii_alphanumeric() || matches!(ch, '_' | '-'))
                    .count();
                out.push((Tok::Keyword(chars[i..i + n].iter().collect()), line));
                i += n;
            }
            _ => {
                let tok = match c {
                    '$' => Tok::Dollar,
                    '*' => Tok::Star,
                    '(' => Tok::Open,
                    ')' => Tok::Close,
                    ',' => Tok::Comma,
                    ';' => Tok::Semi,
                    '=' => Tok::Eq,
                    _ => return Err(err(line, format!("unexpected character {c:?}"))),
                };
                out.push((tok, line));
                i += 1;
            }
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
    fn line(&self) -> usize {
        self.toks.get(self.pos).or(self.toks.last()).map_or(0, |t| t.1)
    }

    fn next(&mut self) -> Result<Tok, AlignmentError> {
        let t = self.toks.get(self.pos).ok_or_else(|| err(self.line(), "unexpected end of file"))?;
        self.pos += 1;
        Ok(t.0.clone())
    }

    fn expect(&mut self, want: Tok) -> Result<(), AlignmentError> {
        let line = self.line();
        let got = self.next()?;
        if got == want {
            Ok(())
        } else {
            Err(err(line, format!("expected {want:?}, found {got:?}")))
        }
    }

    fn keyword(&mut self, want: &str) -> Result<(), AlignmentError> {
        self.expect(Tok::Keyword(want.to_string()))
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    /// `( value, value, … )`
    fn list(&mut self) -> Result<Vec<StepValue>, AlignmentError> {
        self.expect(Tok::Open)?;
        let mut items = Vec::new();
        if self.peek() == Some(&Tok::Close) {
            self.pos += 1;
            return Ok(items);
        }
        loop {
            items.push(self.value()?);
            let line = self.line();
            match self.next()? {
                Tok::Comma => continue,
                Tok::Close => return Ok(items),
                t => return Err(err(line, format!("expected ',' or ')', found {t:?}"))),
            }
        }
    }

    fn value(&mut self) -> Result<StepValue, AlignmentError> {
        let line = self.line();
        Ok(match self.next()? {
            Tok::Int(v) => StepValue::Integer(v),
            Tok::Real(v) => StepValue::Real(v),
            Tok::Str(s) => StepValue::String(s),
            Tok::Enum(s) => StepValue::Enum(s),
            Tok::Id(id) => StepValue::Ref(id),
            Tok::Dollar => StepValue::Omitted,
            Tok::Star => StepValue::Derived,
            Tok::Open => {
                self.pos -= 1;
                StepValue::List(self.list()?)
            }
            Tok::Keyword(k) => StepValue::Typed(k, self.list()?),
            t => return Err(err(line, format!("unexpected {t:?} in parameter list"))),
        })
    }
}

/// Parses a STEP physical file, checking section structure, record
/// terminators, unique entity ids and that every `#ref` resolves.
pub fn parse_step(text: &str) -> Result<StepFile, AlignmentError> {
    let mut p = Parser {
        toks: tokenize(text)?,
        pos: 0,
    };
    p.keyword("ISO-10303-21")?;
    p.expect(Tok::Semi)?;
    p.keyword("HEADER")?;
    p.expect(Tok::Semi)?;
    let mut file = StepFile::default();
    loop {
        let line = p.line();
        match p.next()? {
            Tok::Keyword(k) if k == "ENDSEC" => break,
            Tok::Keyword(k) => {
                let args = p.list()?;
                p.expect(Tok::Semi)?;
                file.header.push((k, args));
            }
            t => return Err(err(line, format!("unexpected {t:?} in header"))),
        }
    }
    p.expect(Tok::Semi)?;
    p.keyword("DATA")?;
    p.expect(Tok::Semi)?;
    loop {
        let line = p.line();
        match p.next()? {
            Tok::Keyword(k) if k == "ENDSEC" => break,
            Tok::Id(id) => {
                p.expect(Tok::Eq)?;
                let name_line = p.line();
                let name = match p.next()? {
                    Tok::Keyword(k) => k,
                    t => return Err(err(name_line, format!("expected entity name, found {t:?}"))),
                };
                let args = p.list()?;
                p.expect(Tok::Semi)?;
                if file.entities.insert(id, StepEntity { id, name, args }).is_some() {
                    return Err(err(line, format!("duplicate id #{id}")));
                }
            }
            t => return Err(err(line, format!("unexpected {t:?} in data section"))),
        }
    }
    p.expect(Tok::Semi)?;
    p.keyword("END-ISO-10303-21")?;
    p.expect(Tok::Semi)?;
    if p.pos != p.toks.len() {
        return Err(err(p.line(), "content after END-ISO-10303-21"));
    }
    for e in file.entities.values() {
        let mut refs = Vec::new();
        e.args.iter().for_each(|a| a.refs(&mut refs));
        if let Some(bad) = refs.iter().find(|r| !file.entities.contains_key(r)) {
            return Err(AlignmentError::Step(format!("#{} references missing #{bad}", e.id)));
        }
    }
    Ok(file)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "ISO-10303-21;\nHEADER;\nFILE_DESCRIPTION(('x'),'2;1');\nENDSEC;\nDATA;\n\
#1=IFCCARTESIANPOINT((1.5,-2.E-3));\n/* note */\n#2=IFCTHING('it''s',#1,$,*,.LINE.,IFCLENGTHMEASURE(3.),(#1,#1),());\n\
ENDSEC;\nEND-ISO-10303-21;\n";

    #[test]
    fn parses_records() {
        let f = parse_step(SAMPLE).unwrap();
        assert_eq!(f.header.len(), 1);
        assert_eq!(f.entities.len(), 2);
        let e = f.get(2).unwrap();
        assert_eq!(e.args[0], StepValue::String("it's".into()));
        assert_eq!(e.args[1].as_ref_id(), Some(1));
        assert_eq!(e.args[2], StepValue::Omitted);
        assert_eq!(e.args[3], StepValue::Derived);
        assert_eq!(e.args[4].as_enum(), Some("LINE"));
        assert_eq!(e.args[5].as_f64(), Some(3.0));
        assert_eq!(e.args[7], StepValue::List(vec![]));
        let pt = f.get(1).unwrap().args[0].as_list().unwrap();
        assert_eq!(pt[1].as_f64(), Some(-0.002));
    }

    #[test]
    fn rejects_malformed_files() {
        let dangling = SAMPLE.replace("#1,#1", "#1,#9");
        assert!(parse_step(&dangling).is_err());
        let unterminated = SAMPLE.replace("(1.5,-2.E-3));", "(1.5,-2.E-3))");
        assert!(parse_step(&unterminated).is_err());
        let unbalanced = SAMPLE.replace("(1.5,-2.E-3));", "((1.5,-2.E-3));");
        assert!(parse_step(&unbalanced).is_err());
        let dup = SAMPLE.replace("#2=", "#1=");
        assert!(parse_step(&dup).is_err());
        assert!(parse_step(&SAMPLE.replace("END-ISO-10303-21;", "")).is_err());
        assert!(parse_step(&SAMPLE.replace("'it''s'", "'open")).is_err());
    }
}
