//! Checkpoint files: a text manifest ending in an `end` line, then every
//! array as little-endian binary64 in manifest order.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{ArrayD, IxDyn};

use super::adam::OptimState;
use super::schedule::Schedule;
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::model::{Model, ModelKind, ParamSet};

pub const CHECKPOINT_MAGIC: &str = "radar-lfista checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: ExperimentConfig,
    pub model: Model,
    pub optim: OptimState,
    pub schedule: Schedule,
    pub epoch: usize,
    pub best_val_loss: f64,
}

impl Checkpoint {
    /// The stored model, after checking it fits a `side x side` grid and
    /// matches the layout a fresh model of the same kind would have.
    pub fn model_for(&self, template: &Model) -> Result<Model> {
        if template.kind() != self.model.kind() {
            return Err(Error::format(
                0,
                format!("checkpoint holds {}, expected {}", self.model.kind(), template.kind()),
            ));
        }
        if template.side() != self.model.side() {
            return Err(Error::format(
                0,
                format!(
                    "shape mismatch: checkpoint grid is {0}x{0}, expected {1}x{1}",
                    self.model.side(),
                    template.side()
                ),
            ));
        }
        let mut m = template.clone();
        m.params_mut().load_from(self.model.params())?;
        Ok(m)
    }
}

fn f64_bits(v: f64) -> String {
    format!("{:016x}", v.to_bits())
}

fn parse_bits(s: &str) -> Option<f64> {
    u64::from_str_radix(s, 16).ok().map(f64::from_bits)
}

pub fn encode_checkpoint(c: &Checkpoint) -> Vec<u8> {
    let mut head = String::new();
    let mut payload = Vec::new();
    writeln!(head, "{CHECKPOINT_MAGIC}").unwrap();
    writeln!(head, "version {CHECKPOINT_VERSION}").unwrap();
    writeln!(head, "model {}", c.model.kind()).unwrap();
    writeln!(head, "side {}", c.model.side()).unwrap();
    writeln!(head, "epoch {}", c.epoch).unwrap();
    writeln!(head, "best_val_loss {}", f64_bits(c.best_val_loss)).unwrap();
    let o = &c.optim;
    writeln!(
        head,
        "adam {} {} {} {} {}",
        o.step,
        f64_bits(o.beta1),
        f64_bits(o.beta2),
        f64_bits(o.eps),
        f64_bits(o.learning_rate)
    )
    .unwrap();
    let s = &c.schedule;
    writeln!(
        head,
        "schedule {} {} {} {} {}",
        f64_bits(s.learning_rate),
        f64_bits(s.factor),
        s.patience,
        f64_bits(s.best),
        s.bad_epochs
    )
    .unwrap();
    for line in c.config.to_text().lines().filter(|l| !l.starts_with("out_dir ")) {
        writeln!(head, "config {line}").unwrap();
    }
    let mut push = |head: &mut String, role: &str, name: &str, trainable: bool, a: &ArrayD<f64>| {
        let shape: Vec<String> = a.shape().iter().map(|d| d.to_string()).collect();
        writeln!(
            head,
            "array {role} {name} {} {} {}",
            u8::from(trainable),
            shape.join("x"),
            payload.len()
        )
        .unwrap();
        for v in a.iter() {
            payload.extend_from_slice(&v.to_le_bytes());
        }
    };
    for (i, p) in c.model.params().iter().enumerate() {
        push(&mut head, "param", &p.name, p.trainable, &p.value);
        push(&mut head, "adam_m", &p.name, p.trainable, &c.optim.m[i]);
        push(&mut head, "adam_v", &p.name, p.trainable, &c.optim.v[i]);
    }
    writeln!(head, "end").unwrap();
    let mut out = head.into_bytes();
    out.extend_from_slice(&payload);
    out
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let marker = b"\nend\n";
    let split = bytes
        .windows(marker.len())
        .position(|w| w == marker)
        .ok_or_else(|| Error::format(0, "checkpoint manifest has no end line"))?;
    let manifest_len = split + marker.len();
    let head = std::str::from_utf8(&bytes[..split])
        .map_err(|e| Error::format(e.valid_up_to() as u64, "manifest is not UTF-8"))?;
    let payload = &bytes[manifest_len..];

    let mut lines = head.lines();
    if lines.next() != Some(CHECKPOINT_MAGIC) {
        return Err(Error::format(0, "not a checkpoint file"));
    }
    let bad = |msg: String| Error::format(0, msg);

    let mut kind = None;
    let mut side = None;
    let mut epoch = None;
    let mut best = None;
    let mut optim: Option<(u64, [f64; 4])> = None;
    let mut schedule = None;
    let mut config_text = String::new();
    let mut params = ParamSet::new();
    let mut moments: (Vec<ArrayD<f64>>, Vec<ArrayD<f64>>) = (Vec::new(), Vec::new());
    let mut consumed = 0usize;

    for line in lines {
        let (key, rest) = line.split_once(' ').unwrap_or((line, ""));
        let f: Vec<&str> = rest.split_whitespace().collect();
        let num = |s: &str| s.parse::<usize>().map_err(|_| bad(format!("bad number in '{line}'")));
        let bits = |s: &str| parse_bits(s).ok_or_else(|| bad(format!("bad float in '{line}'")));
        match key {
            "version" => {
                let v: u32 = rest.trim().parse().map_err(|_| bad(format!("bad version '{rest}'")))?;
                if v != CHECKPOINT_VERSION {
                    return Err(bad(format!("unsupported checkpoint version {v}")));
                }
            }
            "model" => kind = Some(rest.trim().parse::<ModelKind>().map_err(|e| bad(e.to_string()))?),
            "side" => side = Some(num(rest.trim())?),
            "epoch" => epoch = Some(num(rest.trim())?),
            "best_val_loss" => best = Some(bits(rest.trim())?),
            "adam" if f.len() == 5 => {
                let step = f[0].parse().map_err(|_| bad(format!("bad step in '{line}'")))?;
                optim = Some((step, [bits(f[1])?, bits(f[2])?, bits(f[3])?, bits(f[4])?]));
            }
            "schedule" if f.len() == 5 => {
                schedule = Some(Schedule {
                    learning_rate: bits(f[0])?,
                    factor: bits(f[1])?,
                    patience: num(f[2])?,
                    best: bits(f[3])?,
                    bad_epochs: num(f[4])?,
                });
            }
            "config" => {
                config_text.push_str(rest);
                config_text.push('\n');
            }
            "array" if f.len() == 5 => {
                let shape: Vec<usize> = f[3].split('x').map(num).collect::<Result<_>>()?;
                let offset = num(f[4])?;
                let len: usize = shape.iter().product();
                if offset != consumed {
                    return Err(bad(format!("array {} at offset {offset}, expected {consumed}", f[1])));
                }
                let end = offset + 8 * len;
                if end > payload.len() {
                    return Err(Error::format(
                        (manifest_len + payload.len()) as u64,
                        format!("truncated: array {} needs bytes up to {}", f[1], manifest_len + end),
                    ));
                }
                let data: Vec<f64> = payload[offset..end]
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect();
                let arr = ArrayD::from_shape_vec(IxDyn(&shape), data).expect("length checked");
                consumed = end;
                match f[0] {
                    "param" => {
                        params.push(f[1], arr, f[2] == "1");
                    }
                    "adam_m" => moments.0.push(arr),
                    "adam_v" => moments.1.push(arr),
                    other => return Err(bad(format!("unknown array role '{other}'"))),
                }
            }
            _ => return Err(bad(format!("unrecognized manifest line '{line}'"))),
        }
    }
    if consumed != payload.len() {
        return Err(Error::format(
            (manifest_len + consumed) as u64,
            format!("{} trailing bytes after the last array", payload.len() - consumed),
        ));
    }
    let missing = |what: &str| bad(format!("manifest lacks {what}"));
    let kind = kind.ok_or_else(|| missing("model"))?;
    let side = side.ok_or_else(|| missing("side"))?;
    let (step, [beta1, beta2, eps, learning_rate]) = optim.ok_or_else(|| missing("adam"))?;
    if moments.0.len() != params.len() || moments.1.len() != params.len() {
        return Err(bad("optimizer moments do not match parameters".into()));
    }
    for (p, m) in params.iter().zip(&moments.0) {
        if p.value.shape() != m.shape() {
            return Err(bad(format!("shape mismatch between {} and its moments", p.name)));
        }
    }
    Ok(Checkpoint {
        config: ExperimentConfig::from_text(&config_text)?,
        model: Model::from_params(kind, side, params)?,
        optim: OptimState {
            m: moments.0,
            v: moments.1,
            step,
            beta1,
            beta2,
            eps,
            learning_rate,
        },
        schedule: schedule.ok_or_else(|| missing("schedule"))?,
        epoch: epoch.ok_or_else(|| missing("epoch"))?,
        best_val_loss: best.ok_or_else(|| missing("best_val_loss"))?,
    })
}

pub fn save_checkpoint(path: impl AsRef<Path>, c: &Checkpoint) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_checkpoint(c)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::SensingMatrix;
    use ndarray::Array2;

    fn sample(kind: ModelKind) -> Checkpoint {
        let a = SensingMatrix::from_real(Array2::from_shape_fn((6, 16), |(i, j)| {
            ((i * 7 + j * 3) % 5) as f64 - 1.7
        }))
        .unwrap();
        let model = Model::new(kind, &a, 4, 9).unwrap();
        let mut optim = OptimState::new(model.params(), 1e-3);
        optim.step = 17;
        for m in &mut optim.m {
            m.mapv_inplace(|_| 0.1f64.sqrt());
        }
        Checkpoint {
            config: ExperimentConfig::fast(),
            model,
            optim,
            schedule: Schedule {
                bad_epochs: 3,
                best: 0.123456789,
                ..Schedule::default()
            },
            epoch: 5,
            best_val_loss: 1.0 / 3.0,
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        for kind in ModelKind::ALL {
            let c = sample(kind);
            let back = decode_checkpoint(&encode_checkpoint(&c)).unwrap();
            assert_eq!(back, c);
            assert_eq!(encode_checkpoint(&back), encode_checkpoint(&c));
        }
    }

    #[test]
    fn output_location_is_not_recorded() {
        let c = sample(ModelKind::Dnn);
        let mut moved = c.clone();
        moved.config.out_dir = "/elsewhere".into();
        assert_eq!(encode_checkpoint(&moved), encode_checkpoint(&c));
    }

    #[test]
    fn truncated_file_is_format_error() {
        let bytes = encode_checkpoint(&sample(ModelKind::Dnn));
        for cut in [bytes.len() - 1, bytes.len() - 800, 40] {
            assert!(matches!(decode_checkpoint(&bytes[..cut]), Err(Error::Format { .. })));
        }
    }

    #[test]
    fn unknown_version_refused() {
        let text = String::from_utf8_lossy(&encode_checkpoint(&sample(ModelKind::Dnn))).into_owned();
        let bumped = text.replacen("version 1\n", "version 2\n", 1);
        let err = decode_checkpoint(bumped.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("version 2"));
    }

    #[test]
    fn different_grid_is_shape_mismatch() {
        let c = sample(ModelKind::Dnn);
        let a = SensingMatrix::from_real(Array2::ones((6, 25))).unwrap();
        let other = Model::new(ModelKind::Dnn, &a, 5, 0).unwrap();
        let err = c.model_for(&other).unwrap_err();
        assert!(err.to_string().contains("shape mismatch"));
    }
}
