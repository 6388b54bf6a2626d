//! Declarative layer tables.
//!
//! An architecture file is plain text, one layer per line, with
//! whitespace-separated columns:
//!
//! ```text
//! kind  units  kernel  scale  dil  act  norm  skip  output
//! ```
//!
//! `kind` is one of `input_z`, `input_y`, `input_x`, `dense`, `conv`,
//! `convt` or `res`; `units` is a channel count (`3x256` for a residual block
//! of three 256-channel convolutions); `scale` is `x1`, `x2` or `x1/2`;
//! `skip` is `-`, `src:<id>` (this row's output is a skip source),
//! `in:<id>` (concatenate the source onto this row's input) or `out:<id>`
//! (concatenate it onto this row's output); `output` is the spatial shape
//! `HxW`. Unused columns hold `-`. Lines starting with `#` are comments;
//! `name <id>` and `role generator|discriminator` are header lines.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::nn::Activation;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Generator,
    Discriminator,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerKind {
    InputZ,
    InputY,
    InputX,
    Dense,
    Conv,
    ConvTranspose,
    Residual,
}

impl LayerKind {
    pub fn token(self) -> &'static str {
        match self {
            LayerKind::InputZ => "input_z",
            LayerKind::InputY => "input_y",
            LayerKind::InputX => "input_x",
            LayerKind::Dense => "dense",
            LayerKind::Conv => "conv",
            LayerKind::ConvTranspose => "convt",
            LayerKind::Residual => "res",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "input_z" => LayerKind::InputZ,
            "input_y" => LayerKind::InputY,
            "input_x" => LayerKind::InputX,
            "dense" => LayerKind::Dense,
            "conv" => LayerKind::Conv,
            "convt" => LayerKind::ConvTranspose,
            "res" => LayerKind::Residual,
            _ => return None,
        })
    }

    pub fn is_input(self) -> bool {
        matches!(self, LayerKind::InputZ | LayerKind::InputY | LayerKind::InputX)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scaling {
    Same,
    Up2,
    Down2,
}

impl Scaling {
    fn token(self) -> &'static str {
        match self {
            Scaling::Same => "x1",
            Scaling::Up2 => "x2",
            Scaling::Down2 => "x1/2",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Norm {
    None,
    Batch,
    Instance,
}

impl Norm {
    fn token(self) -> &'static str {
        match self {
            Norm::None => "-",
            Norm::Batch => "batch",
            Norm::Instance => "instance",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Skip {
    None,
    Source(String),
    IntoInput(String),
    OntoOutput(String),
}

impl Skip {
    fn token(&self) -> String {
        match self {
            Skip::None => "-".into(),
            Skip::Source(id) => format!("src:{id}"),
            Skip::IntoInput(id) => format!("in:{id}"),
            Skip::OntoOutput(id) => format!("out:{id}"),
        }
    }

    pub fn id(&self) -> Option<&str> {
        match self {
            Skip::None => None,
            Skip::Source(s) | Skip::IntoInput(s) | Skip::OntoOutput(s) => Some(s),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerRow {
    pub kind: LayerKind,
    /// Output channels (latent channels for `input_z`, 0 when unspecified).
    pub units: usize,
    /// Number of convolutions inside a residual block.
    pub repeats: usize,
    pub kernel: usize,
    pub scaling: Scaling,
    pub dilation: usize,
    pub activation: Activation,
    pub norm: Norm,
    pub skip: Skip,
    /// Tabulated spatial output shape.
    pub output: (usize, usize),
    /// 1-based line in the source file (0 when built in code).
    pub line: usize,
}

impl LayerRow {
    pub fn new(kind: LayerKind, units: usize, output: (usize, usize)) -> Self {
        LayerRow {
            kind,
            units,
            repeats: 1,
            kernel: 0,
            scaling: Scaling::Same,
            dilation: 1,
            activation: Activation::Identity,
            norm: Norm::None,
            skip: Skip::None,
            output,
            line: 0,
        }
    }

    pub fn kernel(mut self, k: usize) -> Self {
        self.kernel = k;
        self
    }

    pub fn scaling(mut self, s: Scaling) -> Self {
        self.scaling = s;
        self
    }

    pub fn dilation(mut self, d: usize) -> Self {
        self.dilation = d;
        self
    }

    pub fn act(mut self, a: Activation) -> Self {
        self.activation = a;
        self
    }

    pub fn norm(mut self, n: Norm) -> Self {
        self.norm = n;
        self
    }

    pub fn skip(mut self, s: Skip) -> Self {
        self.skip = s;
        self
    }

    pub fn repeats(mut self, r: usize) -> Self {
        self.repeats = r;
        self
    }
}

/// Where the latent code enters a generator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LatentInjection {
    pub row: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ArchSpec {
    pub name: String,
    pub role: Role,
    pub rows: Vec<LayerRow>,
    /// Free-text comment lines kept from the source file.
    pub notes: Vec<String>,
}

impl ArchSpec {
    pub fn new(name: impl Into<String>, role: Role, rows: Vec<LayerRow>) -> Self {
        ArchSpec {
            name: name.into(),
            role,
            rows,
            notes: Vec::new(),
        }
    }

    pub fn latent_injection(&self) -> Option<LatentInjection> {
        self.rows
            .iter()
            .position(|r| r.kind == LayerKind::InputZ)
            .map(|row| {
                let r = &self.rows[row];
                LatentInjection {
                    row,
                    channels: r.units.max(1),
                    height: r.output.0,
                    width: r.output.1,
                }
            })
    }

    /// Channels and spatial size of the final row.
    pub fn output_shape(&self) -> Option<(usize, usize, usize)> {
        self.rows.last().map(|r| (r.units, r.output.0, r.output.1))
    }

    fn err(&self, row: usize, msg: impl Into<String>) -> Error {
        Error::SpecValidation {
            arch: self.name.clone(),
            row: self.rows.get(row).map(|r| r.line.max(row + 1)).unwrap_or(row + 1),
            kind: self
                .rows
                .get(row)
                .map(|r| r.kind.token().to_string())
                .unwrap_or_default(),
            msg: msg.into(),
        }
    }

    pub(crate) fn row_error(&self, row: usize, msg: impl Into<String>) -> Error {
        self.err(row, msg)
    }

    /// Structural checks that do not depend on channel counts: skip links,
    /// head activation, inputs and the spatial shape chain.
    pub fn validate(&self) -> Result<()> {
        if self.rows.is_empty() {
            return Err(self.err(0, "no layers"));
        }
        let mut counts: HashMap<&str, (usize, usize)> = HashMap::new();
        for (i, r) in self.rows.iter().enumerate() {
            if let Some(id) = r.skip.id() {
                let e = counts.entry(id).or_default();
                match r.skip {
                    Skip::Source(_) => e.0 += 1,
                    _ => e.1 += 1,
                }
            }
            if !r.kind.is_input() {
                if r.units == 0 {
                    return Err(self.err(i, "missing unit count"));
                }
                if matches!(r.kind, LayerKind::Conv | LayerKind::ConvTranspose | LayerKind::Residual)
                    && (r.kernel == 0 || r.kernel % 2 == 0)
                {
                    return Err(self.err(i, "kernel must be odd and positive"));
                }
                if r.dilation == 0 {
                    return Err(self.err(i, "dilation must be >= 1"));
                }
            }
        }
        let mut ids: Vec<_> = counts.into_iter().collect();
        ids.sort();
        for (id, (src, dst)) in ids {
            if src != 1 || dst != 1 {
                return Err(self.err(
                    self.rows.len() - 1,
                    format!("skip link `{id}` must appear exactly once as source and once as destination (found {src} source, {dst} destination)"),
                ));
            }
        }
        let mut seen_src = Vec::new();
        for (i, r) in self.rows.iter().enumerate() {
            match &r.skip {
                Skip::Source(id) => seen_src.push(id.as_str()),
                Skip::IntoInput(id) | Skip::OntoOutput(id) if !seen_src.contains(&id.as_str()) => {
                    return Err(self.err(i, format!("skip `{id}` used before its source")));
                }
                _ => {}
            }
        }
        let last = self.rows.len() - 1;
        let head = self.rows[last].activation;
        match self.role {
            Role::Generator => {
                if head != Activation::Tanh {
                    return Err(self.err(last, "generator head must be tanh"));
                }
                if !self.rows.iter().any(|r| r.kind == LayerKind::InputY) {
                    return Err(self.err(0, "generator needs an input_y row"));
                }
                if self.rows.iter().any(|r| r.kind == LayerKind::InputX) {
                    return Err(self.err(0, "generator cannot take input_x"));
                }
            }
            Role::Discriminator => {
                if head != Activation::Sigmoid {
                    return Err(self.err(last, "discriminator head must be sigmoid"));
                }
                if self.rows.iter().filter(|r| r.kind == LayerKind::InputX).count() != 1 {
                    return Err(self.err(0, "discriminator needs exactly one input_x row"));
                }
                if self.rows.iter().any(|r| r.kind == LayerKind::InputZ) {
                    return Err(self.err(0, "discriminator cannot take input_z"));
                }
            }
        }
        if self.rows.iter().filter(|r| r.kind == LayerKind::InputZ).count() > 1 {
            return Err(self.err(0, "at most one input_z row"));
        }
        // Channel-free pass over the compiled shape chain.
        super::network::plan_shapes(self, 3, true, 1).map(|_| ())
    }

    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        let perr = |line: usize, msg: String| Error::Parse {
            source_name: source_name.to_string(),
            line,
            msg,
        };
        let mut name = None;
        let mut role = None;
        let mut rows = Vec::new();
        let mut notes = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(c) = trimmed.strip_prefix('#') {
                notes.push(c.trim().to_string());
                continue;
            }
            let cols: Vec<&str> = trimmed.split_whitespace().collect();
            match cols[0] {
                "name" if cols.len() == 2 => {
                    name = Some(cols[1].to_string());
                    continue;
                }
                "role" if cols.len() == 2 => {
                    role = Some(match cols[1] {
                        "generator" => Role::Generator,
                        "discriminator" => Role::Discriminator,
                        other => return Err(perr(line, format!("unknown role `{other}`"))),
                    });
                    continue;
                }
                _ => {}
            }
            if cols.len() != 9 {
                return Err(perr(line, format!("expected 9 columns, found {}", cols.len())));
            }
            let kind = LayerKind::parse(cols[0]).ok_or_else(|| perr(line, format!("unknown layer kind `{}`", cols[0])))?;
            let (repeats, units) = parse_units(cols[1]).ok_or_else(|| perr(line, format!("bad units `{}`", cols[1])))?;
            let kernel = parse_kernel(cols[2]).ok_or_else(|| perr(line, format!("bad kernel `{}`", cols[2])))?;
            let scaling = match cols[3] {
                "-" | "x1" => Scaling::Same,
                "x2" => Scaling::Up2,
                "x1/2" => Scaling::Down2,
                s => return Err(perr(line, format!("bad scaling `{s}`"))),
            };
            let dilation = match cols[4] {
                "-" => 1,
                s => s.parse().map_err(|_| perr(line, format!("bad dilation `{s}`")))?,
            };
            let activation = Activation::parse(cols[5]).ok_or_else(|| perr(line, format!("bad activation `{}`", cols[5])))?;
            let norm = match cols[6] {
                "-" | "none" => Norm::None,
                "batch" => Norm::Batch,
                "instance" => Norm::Instance,
                s => return Err(perr(line, format!("bad normalization `{s}`"))),
            };
            let skip = match cols[7] {
                "-" => Skip::None,
                s => {
                    let (tag, id) = s.split_once(':').ok_or_else(|| perr(line, format!("bad skip `{s}`")))?;
                    if id.is_empty() {
                        return Err(perr(line, format!("bad skip `{s}`")));
                    }
                    match tag {
                        "src" => Skip::Source(id.into()),
                        "in" => Skip::IntoInput(id.into()),
                        "out" => Skip::OntoOutput(id.into()),
                        _ => return Err(perr(line, format!("bad skip `{s}`"))),
                    }
                }
            };
            let output = parse_hw(cols[8]).ok_or_else(|| perr(line, format!("bad output shape `{}`", cols[8])))?;
            rows.push(LayerRow {
                kind,
                units,
                repeats,
                kernel,
                scaling,
                dilation,
                activation,
                norm,
                skip,
                output,
                line,
            });
        }
        let name = name.ok_or_else(|| perr(0, "missing `name` line".into()))?;
        let role = role.ok_or_else(|| perr(0, "missing `role` line".into()))?;
        Ok(ArchSpec {
            name,
            role,
            rows,
            notes,
        })
    }

    /// Serialise back to the text format.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for n in &self.notes {
            let _ = writeln!(s, "# {n}");
        }
        let _ = writeln!(s, "name {}", self.name);
        let role = match self.role {
            Role::Generator => "generator",
            Role::Discriminator => "discriminator",
        };
        let _ = writeln!(s, "role {role}");
        for r in &self.rows {
            let units = match (r.kind, r.units) {
                (LayerKind::Residual, u) => format!("{}x{u}", r.repeats),
                (_, 0) => "-".into(),
                (_, u) => u.to_string(),
            };
            let input = r.kind.is_input();
            let kernel = if r.kernel == 0 { "-".into() } else { format!("{0}x{0}", r.kernel) };
            let scale = if input || r.kind == LayerKind::Dense { "-" } else { r.scaling.token() };
            let dil = if input || r.kind == LayerKind::Dense { "-".into() } else { r.dilation.to_string() };
            let _ = writeln!(
                s,
                "{:<9} {:<6} {:<6} {:<5} {:<4} {:<8} {:<9} {:<8} {}x{}",
                r.kind.token(),
                units,
                kernel,
                scale,
                dil,
                r.activation.name(),
                r.norm.token(),
                r.skip.token(),
                r.output.0,
                r.output.1
            );
        }
        s
    }
}

fn parse_units(s: &str) -> Option<(usize, usize)> {
    if s == "-" {
        return Some((1, 0));
    }
    if let Some((r, u)) = s.split_once('x') {
        return Some((r.parse().ok()?, u.parse().ok()?));
    }
    Some((1, s.parse().ok()?))
}

fn parse_kernel(s: &str) -> Option<usize> {
    if s == "-" {
        return Some(0);
    }
    match s.split_once('x') {
        Some((a, b)) if a == b => a.parse().ok(),
        Some(_) => None,
        None => s.parse().ok(),
    }
}

fn parse_hw(s: &str) -> Option<(usize, usize)> {
    match s.split_once('x') {
        Some((h, w)) => Some((h.parse().ok()?, w.parse().ok()?)),
        None => {
            let v = s.parse().ok()?;
            Some((v, v))
        }
    }
}
