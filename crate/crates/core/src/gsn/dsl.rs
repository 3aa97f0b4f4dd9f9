//! Line-oriented text format for arguments. See `docs/gsn-format.md`.

use std::fmt::Write;

use thiserror::Error;

use super::{
    normalize_phases, Annotation, AnnotationBody, ArgumentModel, ArtifactKind, GsnLink, GsnNode,
    LinkKind, NodeKind, Phase, TraceLink,
};

pub const FORMAT_VERSION: u32 = 1;
const QUARANTINE_HEADER: &str = "# orphaned";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct DslError {
    pub line: usize,
    pub message: String,
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn write_annotation(out: &mut String, a: &Annotation) {
    match &a.body {
        AnnotationBody::Placeholder { key, value } => write!(
            out,
            "annotate {} placeholder {key}={}",
            a.node,
            quote(value)
        )
        .unwrap(),
        AnnotationBody::Stereotype(s) => {
            write!(out, "annotate {} stereotype <<{s}>>", a.node).unwrap()
        }
    }
    if !a.phases.is_empty() {
        let p: Vec<&str> = a.phases.iter().map(|p| p.as_str()).collect();
        write!(out, " phases={}", p.join(",")).unwrap();
    }
    if a.generated {
        out.push_str(" origin=generated");
    }
    out.push('\n');
}

fn write_trace(out: &mut String, t: &TraceLink) {
    write!(
        out,
        "trace {} {} {}",
        t.node,
        t.artifact,
        quote(&t.reference)
    )
    .unwrap();
    if let Some(fp) = &t.fingerprint {
        write!(out, " fp={fp}").unwrap();
    }
    if let Some(v) = &t.value {
        write!(out, " value={}", quote(v)).unwrap();
    }
    out.push('\n');
}

/// Canonical text: header, nodes in id order, links in sorted order, then
/// annotations and trace links in insertion order, then the quarantine.
pub fn serialize_dsl(arg: &ArgumentModel) -> String {
    let mut out = format!(
        "gsn {FORMAT_VERSION}\nargument {} version {}\n",
        quote(&arg.name),
        arg.version
    );
    if !arg.nodes.is_empty() {
        out.push('\n');
        for n in arg.nodes.values() {
            writeln!(
                out,
                "node {} {} v{} {}",
                n.id,
                n.kind,
                n.version,
                quote(&n.description)
            )
            .unwrap();
        }
    }
    if !arg.links.is_empty() {
        out.push('\n');
        for l in &arg.links {
            writeln!(out, "link {} {} {}", l.kind, l.source, l.target).unwrap();
        }
    }
    if !arg.annotations.is_empty() {
        out.push('\n');
        for a in &arg.annotations {
            write_annotation(&mut out, a);
        }
    }
    if !arg.traces.is_empty() {
        out.push('\n');
        for t in &arg.traces {
            write_trace(&mut out, t);
        }
    }
    if !arg.quarantine.is_empty() {
        writeln!(out, "\n{QUARANTINE_HEADER}").unwrap();
        for a in &arg.quarantine.annotations {
            write_annotation(&mut out, a);
        }
        for t in &arg.quarantine.traces {
            write_trace(&mut out, t);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Quoted(String),
    Attr(String, String),
}

fn lex_line(line: &str) -> Result<Vec<Tok>, String> {
    let chars: Vec<char> = line.chars().collect();
    let mut i = 0;
    let mut out = Vec::new();
    let read_quoted = |i: &mut usize| -> Result<String, String> {
        // at the opening quote
        *i += 1;
        let mut s = String::new();
        while *i < chars.len() {
            match chars[*i] {
                '"' => {
                    *i += 1;
                    return Ok(s);
                }
                '\\' => {
                    let esc = chars.get(*i + 1).ok_or("dangling escape")?;
                    s.push(match esc {
                        '"' => '"',
                        '\\' => '\\',
                        'n' => '\n',
                        other => return Err(format!("unknown escape `\\{other}`")),
                    });
                    *i += 2;
                }
                c => {
                    s.push(c);
                    *i += 1;
                }
            }
        }
        Err("unterminated string".into())
    };
    while i < chars.len() {
        if chars[i].is_whitespace() {
            i += 1;
            continue;
        }
        if chars[i] == '"' {
            out.push(Tok::Quoted(read_quoted(&mut i)?));
            continue;
        }
        let start = i;
        while i < chars.len() && !chars[i].is_whitespace() && chars[i] != '"' {
            i += 1;
        }
        let word: String = chars[start..i].iter().collect();
        if i < chars.len() && chars[i] == '"' {
            let Some(key) = word.strip_suffix('=') else {
                return Err(format!("unexpected quote after `{word}`"));
            };
            let value = read_quoted(&mut i)?;
            out.push(Tok::Attr(key.to_string(), value));
        } else if let Some((k, v)) = word.split_once('=').filter(|(k, _)| !k.is_empty()) {
            out.push(Tok::Attr(k.to_string(), v.to_string()));
        } else {
            out.push(Tok::Word(word));
        }
    }
    Ok(out)
}

struct LineParser {
    toks: std::vec::IntoIter<Tok>,
}

impl LineParser {
    fn word(&mut self, what: &str) -> Result<String, String> {
        match self.toks.next() {
            Some(Tok::Word(w)) => Ok(w),
            Some(other) => Err(format!("expected {what}, found {}", describe(&other))),
            None => Err(format!("expected {what}")),
        }
    }

    fn quoted(&mut self, what: &str) -> Result<String, String> {
        match self.toks.next() {
            Some(Tok::Quoted(s)) => Ok(s),
            Some(other) => Err(format!(
                "expected quoted {what}, found {}",
                describe(&other)
            )),
            None => Err(format!("expected quoted {what}")),
        }
    }

    fn attrs(&mut self, allowed: &[&str]) -> Result<Vec<(String, String)>, String> {
        let mut out: Vec<(String, String)> = Vec::new();
        for t in self.toks.by_ref() {
            match t {
                Tok::Attr(k, v) if allowed.contains(&k.as_str()) => {
                    if out.iter().any(|(o, _)| *o == k) {
                        return Err(format!("attribute `{k}` given twice"));
                    }
                    out.push((k, v));
                }
                other => return Err(format!("unexpected {}", describe(&other))),
            }
        }
        Ok(out)
    }

    fn id(&mut self) -> Result<String, String> {
        let id = self.word("node id")?;
        if id.starts_with('#') || id.contains(['<', '>', '=']) {
            return Err(format!("invalid node id `{id}`"));
        }
        Ok(id)
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Word(w) => format!("`{w}`"),
        Tok::Quoted(s) => format!("string \"{s}\""),
        Tok::Attr(k, _) => format!("attribute `{k}=`"),
    }
}

fn parse_annotation(p: &mut LineParser) -> Result<Annotation, String> {
    let node = p.id()?;
    let kind = p.word("`placeholder` or `stereotype`")?;
    let body = match kind.as_str() {
        "placeholder" => match p.toks.next() {
            Some(Tok::Attr(key, value)) => AnnotationBody::Placeholder { key, value },
            _ => return Err("expected key=\"value\" after `placeholder`".into()),
        },
        "stereotype" => {
            let w = p.word("<<Name>>")?;
            let name = w
                .strip_prefix("<<")
                .and_then(|s| s.strip_suffix(">>"))
                .filter(|s| !s.is_empty() && !s.contains(['<', '>']))
                .ok_or_else(|| format!("expected <<Name>>, found `{w}`"))?;
            AnnotationBody::Stereotype(name.to_string())
        }
        other => return Err(format!("unknown annotation kind `{other}`")),
    };
    let mut phases = Vec::new();
    let mut generated = false;
    for (k, v) in p.attrs(&["phases", "origin"])? {
        match k.as_str() {
            "phases" => {
                for part in v.split(',') {
                    phases.push(part.parse::<Phase>()?);
                }
            }
            _ if v == "generated" => generated = true,
            _ => return Err(format!("unknown origin `{v}`")),
        }
    }
    Ok(Annotation {
        node,
        body,
        phases: normalize_phases(&phases),
        generated,
    })
}

fn parse_trace(p: &mut LineParser) -> Result<TraceLink, String> {
    let node = p.id()?;
    let artifact: ArtifactKind = p.word("artifact kind")?.parse()?;
    let reference = p.quoted("artifact reference")?;
    let mut t = TraceLink::new(&node, artifact, &reference, None);
    for (k, v) in p.attrs(&["fp", "value"])? {
        if k == "fp" {
            if v.is_empty() || !v.chars().all(|c| c.is_ascii_hexdigit()) {
                return Err(format!("fingerprint `{v}` is not hexadecimal"));
            }
            t.fingerprint = Some(v);
        } else {
            t.value = Some(v);
        }
    }
    Ok(t)
}

pub fn parse_dsl(text: &str) -> Result<ArgumentModel, DslError> {
    let mut arg: Option<ArgumentModel> = None;
    let mut seen_header = false;
    let mut in_quarantine = false;
    // references are resolved once every node is known
    let mut refs: Vec<(usize, String)> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let err = |message: String| DslError { line, message };
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        if trimmed.starts_with('#') {
            if trimmed == QUARANTINE_HEADER {
                if arg.is_none() {
                    return Err(err("quarantine section before the argument header".into()));
                }
                in_quarantine = true;
            }
            continue;
        }
        let toks = lex_line(trimmed).map_err(err)?;
        let mut p = LineParser {
            toks: toks.into_iter(),
        };
        let keyword = p.word("keyword").map_err(err)?;

        if !seen_header {
            if keyword != "gsn" {
                return Err(err(format!("expected `gsn {FORMAT_VERSION}` header")));
            }
            let v = p.word("format version").map_err(err)?;
            if v != FORMAT_VERSION.to_string() {
                return Err(err(format!("unsupported format version `{v}`")));
            }
            p.attrs(&[]).map_err(err)?;
            seen_header = true;
            continue;
        }
        if keyword == "argument" {
            if arg.is_some() {
                return Err(err("duplicate `argument` line".into()));
            }
            let name = p.quoted("argument name").map_err(err)?;
            if p.word("`version`").map_err(err)? != "version" {
                return Err(err("expected `version`".into()));
            }
            let v = p.word("version number").map_err(err)?;
            let version = v
                .parse::<u32>()
                .ok()
                .filter(|v| *v >= 1)
                .ok_or_else(|| err(format!("invalid version `{v}`")))?;
            p.attrs(&[]).map_err(err)?;
            let mut a = ArgumentModel::new(&name);
            a.version = version;
            arg = Some(a);
            continue;
        }
        let Some(a) = arg.as_mut() else {
            return Err(err("expected `argument \"<name>\" version <n>`".into()));
        };
        if in_quarantine && keyword != "annotate" && keyword != "trace" {
            return Err(err(format!(
                "`{keyword}` not allowed in the quarantine section"
            )));
        }
        match keyword.as_str() {
            "node" => {
                let id = p.id().map_err(err)?;
                let kind: NodeKind = p.word("node kind").map_err(err)?.parse().map_err(err)?;
                let v = p.word("version").map_err(err)?;
                let version = v
                    .strip_prefix('v')
                    .and_then(|n| n.parse::<u32>().ok())
                    .filter(|n| *n >= 1)
                    .ok_or_else(|| err(format!("expected version like `v1`, found `{v}`")))?;
                let description = p.quoted("description").map_err(err)?;
                p.attrs(&[]).map_err(err)?;
                if a.nodes.contains_key(&id) {
                    return Err(err(format!("duplicate node `{id}`")));
                }
                a.nodes.insert(
                    id.clone(),
                    GsnNode {
                        id,
                        kind,
                        description,
                        version,
                    },
                );
            }
            "link" => {
                let kind: LinkKind = p.word("link kind").map_err(err)?.parse().map_err(err)?;
                let source = p.id().map_err(err)?;
                let target = p.id().map_err(err)?;
                p.attrs(&[]).map_err(err)?;
                refs.push((line, source.clone()));
                refs.push((line, target.clone()));
                a.links.insert(GsnLink {
                    kind,
                    source,
                    target,
                });
            }
            "annotate" => {
                let ann = parse_annotation(&mut p).map_err(err)?;
                if in_quarantine {
                    a.quarantine.annotations.push(ann);
                } else {
                    refs.push((line, ann.node.clone()));
                    a.annotations.push(ann);
                }
            }
            "trace" => {
                let t = parse_trace(&mut p).map_err(err)?;
                if in_quarantine {
                    a.quarantine.traces.push(t);
                } else {
                    refs.push((line, t.node.clone()));
                    a.traces.push(t);
                }
            }
            other => return Err(err(format!("unknown statement `{other}`"))),
        }
    }

    let Some(arg) = arg else {
        return Err(DslError {
            line: text.lines().count().max(1),
            message: if seen_header {
                "missing `argument` line".into()
            } else {
                format!("expected `gsn {FORMAT_VERSION}` header")
            },
        });
    };
    for (line, id) in refs {
        if !arg.nodes.contains_key(&id) {
            return Err(DslError {
                line,
                message: format!("reference to undeclared node `{id}`"),
            });
        }
    }
    Ok(arg)
}
