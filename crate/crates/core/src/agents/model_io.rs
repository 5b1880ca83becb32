//! Text model files.
//!
//! ```text
//! qtable <n_states> 8        mlp 2 64 64 8
//! <8 values per state>       <n_in values per weight row> ... <bias row>
//! ```
//!
//! Values are written with 17 significant digits so they reload bit-exact.

use std::fmt::Write as _;

use thiserror::Error;

use crate::env::Action;

use super::{Layer, MlpParams, Model, QTable};

#[derive(Debug, Error, PartialEq)]
pub enum ModelIoError {
    #[error("bad model file: {0}")]
    BadModelFile(String),
    #[error("expected a {expected} model, file holds {found}")]
    KindMismatch { expected: String, found: String },
}

fn push_row(out: &mut String, values: &[f64]) {
    let mut first = true;
    for v in values {
        if !first {
            out.push(' ');
        }
        first = false;
        let _ = write!(out, "{v:.16e}");
    }
    out.push('\n');
}

pub fn save_model(model: &Model) -> Vec<u8> {
    let mut out = String::new();
    match model {
        Model::Table(t) => {
            let _ = writeln!(out, "qtable {} {}", t.n_states(), Action::COUNT);
            for row in t.rows() {
                push_row(&mut out, row);
            }
        }
        Model::Mlp(p) => {
            out.push_str("mlp");
            for s in p.sizes() {
                let _ = write!(out, " {s}");
            }
            out.push('\n');
            for layer in &p.layers {
                for j in 0..layer.n_out {
                    push_row(&mut out, &layer.w[j * layer.n_in..(j + 1) * layer.n_in]);
                }
                push_row(&mut out, &layer.b);
            }
        }
    }
    out.into_bytes()
}

fn bad(msg: impl Into<String>) -> ModelIoError {
    ModelIoError::BadModelFile(msg.into())
}

struct Rows<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl Rows<'_> {
    fn next_row(&mut self, width: usize) -> Result<Vec<f64>, ModelIoError> {
        let (n, line) = self
            .lines
            .next()
            .ok_or_else(|| bad("unexpected end of file"))?;
        let values = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| bad(format!("line {}: bad value `{tok}`", n + 1)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if values.len() != width {
            return Err(bad(format!(
                "line {}: expected {width} values, found {}",
                n + 1,
                values.len()
            )));
        }
        Ok(values)
    }

    fn finish(mut self) -> Result<(), ModelIoError> {
        match self.lines.find(|(_, l)| !l.trim().is_empty()) {
            Some((n, _)) => Err(bad(format!("trailing data on line {}", n + 1))),
            None => Ok(()),
        }
    }
}

/// Parses a model file of any kind.
pub fn load_model(bytes: &[u8]) -> Result<Model, ModelIoError> {
    let text = std::str::from_utf8(bytes).map_err(|_| bad("not UTF-8 text"))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| bad("empty file"))?;
    let mut fields = header.split_whitespace();
    let kind = fields.next().ok_or_else(|| bad("empty header"))?;
    let dims = fields
        .map(|f| {
            f.parse::<usize>()
                .map_err(|_| bad(format!("bad dimension `{f}`")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut rows = Rows { lines };

    let model = match kind {
        "qtable" => {
            if dims.len() != 2 || dims[1] != Action::COUNT {
                return Err(bad(format!(
                    "qtable header must be `qtable <n> {}`",
                    Action::COUNT
                )));
            }
            let mut table = Vec::with_capacity(dims[0]);
            for _ in 0..dims[0] {
                let row = rows.next_row(Action::COUNT)?;
                let mut q = [0.0; Action::COUNT];
                q.copy_from_slice(&row);
                table.push(q);
            }
            Model::Table(QTable::from_rows(table))
        }
        "mlp" => {
            if dims.len() < 2
                || dims.contains(&0)
                || *dims.last().unwrap() != Action::COUNT
                || dims[0] != 2
            {
                return Err(bad("mlp header must be `mlp 2 <hidden...> 8`"));
            }
            let mut layers = Vec::new();
            for w in dims.windows(2) {
                let (n_in, n_out) = (w[0], w[1]);
                let mut layer = Layer::zeros(n_in, n_out);
                for j in 0..n_out {
                    layer.w[j * n_in..(j + 1) * n_in].copy_from_slice(&rows.next_row(n_in)?);
                }
                layer.b = rows.next_row(n_out)?;
                layers.push(layer);
            }
            Model::Mlp(MlpParams { layers })
        }
        other => return Err(bad(format!("unknown model kind `{other}`"))),
    };
    rows.finish()?;
    Ok(model)
}

/// Loads a model and checks it is of the `expected` kind (`qtable`/`mlp`).
pub fn load_model_as(bytes: &[u8], expected: &str) -> Result<Model, ModelIoError> {
    let model = load_model(bytes)?;
    if model.kind() != expected {
        return Err(ModelIoError::KindMismatch {
            expected: expected.to_string(),
            found: model.kind().to_string(),
        });
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::DEFAULT_LAYERS;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_table_round_trip() {
        let m = Model::Table(QTable::zeros(100));
        let bytes = save_model(&m);
        assert!(bytes.starts_with(b"qtable 100 8\n"));
        assert_eq!(load_model(&bytes).unwrap(), m);
    }

    #[test]
    fn kind_mismatch() {
        let bytes = save_model(&Model::Table(QTable::zeros(3)));
        assert_eq!(
            load_model_as(&bytes, "mlp").unwrap_err(),
            ModelIoError::KindMismatch {
                expected: "mlp".into(),
                found: "qtable".into()
            }
        );
    }

    #[test]
    fn truncated_and_garbage_files() {
        let bytes = save_model(&Model::Table(QTable::zeros(3)));
        let text = String::from_utf8(bytes.clone()).unwrap();
        let cut = text.lines().take(3).collect::<Vec<_>>().join("\n");
        let cut = cut.as_bytes();
        assert!(matches!(
            load_model(cut),
            Err(ModelIoError::BadModelFile(_))
        ));
        assert!(matches!(
            load_model(b"tree 1 2\n"),
            Err(ModelIoError::BadModelFile(_))
        ));
        let mut extra = bytes.clone();
        extra.extend_from_slice(b"1 2 3\n");
        assert!(matches!(
            load_model(&extra),
            Err(ModelIoError::BadModelFile(_))
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn mlp_round_trip_is_bitwise(seed in any::<u64>(), scale in 1e-3f64..1e3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut p = MlpParams::init(&DEFAULT_LAYERS, &mut rng);
            for v in p.values_mut() {
                *v *= scale;
            }
            p.layers[2].b[3] = -1.0 / 3.0;
            let m = Model::Mlp(p);
            let back = load_model_as(&save_model(&m), "mlp").unwrap();
            let (Model::Mlp(a), Model::Mlp(b)) = (&m, &back) else { unreachable!() };
            for (x, y) in a.values().zip(b.values()) {
                prop_assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }
}
