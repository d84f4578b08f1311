//! Plain-text model checkpoints.
//!
//! ```text
//! seqrec-checkpoint 1
//! kind <sdne|gru>
//! meta <key> <value>          (any number, value runs to end of line)
//! matrix <name> <rows> <cols>
//! <rows lines of cols space-separated floats>
//! ...
//! end
//! ```
//!
//! Floats use Rust's shortest round-trip formatting, so a save/load cycle is
//! exact. SDNE layers are stored as `encoder.k.weight` (`out x in`) and
//! `encoder.k.bias` (`1 x out`), likewise for the decoder; GRU checkpoints hold
//! `w_in`, `w_z`, `w_r` and `w_u`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::gru::{GruModel, PARAMETER_NAMES};
use crate::sdne::{Dense, SdneModel};

const MAGIC: &str = "seqrec-checkpoint 1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub kind: String,
    pub meta: Vec<(String, String)>,
    pub matrices: Vec<(String, Array2<f64>)>,
}

impl Checkpoint {
    pub fn new(kind: &str) -> Self {
        Checkpoint { kind: kind.to_string(), meta: Vec::new(), matrices: Vec::new() }
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.push((key.to_string(), value.to_string()));
        self
    }

    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn matrix(&self, name: &str) -> Result<&Array2<f64>> {
        self.matrices
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, m)| m)
            .ok_or_else(|| Error::Checkpoint(format!("missing matrix {name:?}")))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{MAGIC}");
        let _ = writeln!(out, "kind {}", self.kind);
        for (k, v) in &self.meta {
            let _ = writeln!(out, "meta {k} {v}");
        }
        for (name, m) in &self.matrices {
            let _ = writeln!(out, "matrix {name} {} {}", m.nrows(), m.ncols());
            for row in m.outer_iter() {
                let line: Vec<String> = row.iter().map(|x| format!("{x:?}")).collect();
                let _ = writeln!(out, "{}", line.join(" "));
            }
        }
        out.push_str("end\n");
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |line: usize, m: &str| Error::Checkpoint(format!("line {line}: {m}"));
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        match lines.next() {
            Some((_, l)) if l == MAGIC => {}
            _ => return Err(bad(1, "not a checkpoint (bad magic line)")),
        }
        let kind = match lines.next() {
            Some((_, l)) if l.starts_with("kind ") => l[5..].to_string(),
            _ => return Err(bad(2, "expected kind line")),
        };
        let mut ck = Checkpoint::new(&kind);
        loop {
            let Some((no, line)) = lines.next() else {
                return Err(bad(0, "truncated checkpoint (no end line)"));
            };
            if line == "end" {
                return Ok(ck);
            }
            if let Some(rest) = line.strip_prefix("meta ") {
                let (k, v) = rest.split_once(' ').unwrap_or((rest, ""));
                ck.meta.push((k.to_string(), v.to_string()));
            } else if let Some(rest) = line.strip_prefix("matrix ") {
                let parts: Vec<&str> = rest.split(' ').collect();
                if parts.len() != 3 {
                    return Err(bad(no, "matrix header needs name, rows, cols"));
                }
                let rows: usize = parts[1].parse().map_err(|_| bad(no, "bad row count"))?;
                let cols: usize = parts[2].parse().map_err(|_| bad(no, "bad column count"))?;
                let mut data = Vec::with_capacity(rows * cols);
                for _ in 0..rows {
                    let (rno, row) = lines.next().ok_or_else(|| bad(no, "truncated matrix"))?;
                    let before = data.len();
                    for tok in row.split_ascii_whitespace() {
                        data.push(tok.parse::<f64>().map_err(|_| bad(rno, "bad number"))?);
                    }
                    if data.len() - before != cols {
                        return Err(bad(rno, &format!("expected {cols} values")));
                    }
                }
                let m = Array2::from_shape_vec((rows, cols), data).expect("sized above");
                ck.matrices.push((parts[0].to_string(), m));
            } else {
                return Err(bad(no, "unexpected line"));
            }
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    fn expect_kind(&self, kind: &str) -> Result<()> {
        if self.kind != kind {
            return Err(Error::Checkpoint(format!("expected a {kind} checkpoint, found {}", self.kind)));
        }
        Ok(())
    }
}

pub fn sdne_checkpoint(model: &SdneModel) -> Checkpoint {
    let sizes: Vec<String> = model.layer_sizes().iter().map(|s| s.to_string()).collect();
    let mut ck = Checkpoint::new("sdne").with_meta("layer_sizes", sizes.join(","));
    for (name, layer) in model.named_layers() {
        ck.matrices.push((format!("{name}.weight"), layer.weight.clone()));
        let b = layer.bias.clone().insert_axis(ndarray::Axis(0));
        ck.matrices.push((format!("{name}.bias"), b));
    }
    ck
}

pub fn sdne_from_checkpoint(ck: &Checkpoint) -> Result<SdneModel> {
    ck.expect_kind("sdne")?;
    let sizes: Vec<usize> = ck
        .meta_value("layer_sizes")
        .ok_or_else(|| Error::Checkpoint("missing layer_sizes".into()))?
        .split(',')
        .map(|s| s.parse().map_err(|_| Error::Checkpoint(format!("bad layer size {s:?}"))))
        .collect::<Result<_>>()?;
    if sizes.len() < 2 {
        return Err(Error::Checkpoint("need at least two layer sizes".into()));
    }
    let shell = SdneModel::zeros(&sizes);
    let layer = |name: String, like: &Dense| -> Result<Dense> {
        let weight = ck.matrix(&format!("{name}.weight"))?.clone();
        let bias = ck.matrix(&format!("{name}.bias"))?;
        if weight.dim() != like.weight.dim() || bias.dim() != (1, like.bias.len()) {
            return Err(Error::Checkpoint(format!("layer {name} does not match layer_sizes")));
        }
        Ok(Dense { weight, bias: Array1::from_iter(bias.iter().copied()) })
    };
    let mut model = shell.clone();
    for (k, l) in shell.encoder.iter().enumerate() {
        model.encoder[k] = layer(format!("encoder.{k}"), l)?;
    }
    for (k, l) in shell.decoder.iter().enumerate() {
        model.decoder[k] = layer(format!("decoder.{k}"), l)?;
    }
    Ok(model)
}

pub fn gru_checkpoint(model: &GruModel) -> Checkpoint {
    let mut ck = Checkpoint::new("gru")
        .with_meta("input_dim", model.input_dim())
        .with_meta("hidden", model.hidden_dim());
    for (name, m) in PARAMETER_NAMES.iter().zip(model.params()) {
        ck.matrices.push((name.to_string(), m.clone()));
    }
    ck
}

pub fn gru_from_checkpoint(ck: &Checkpoint) -> Result<GruModel> {
    ck.expect_kind("gru")?;
    let model = GruModel {
        w_in: ck.matrix("w_in")?.clone(),
        w_z: ck.matrix("w_z")?.clone(),
        w_r: ck.matrix("w_r")?.clone(),
        w_u: ck.matrix("w_u")?.clone(),
    };
    model.validate().map_err(|e| Error::Checkpoint(e.to_string()))?;
    Ok(model)
}
