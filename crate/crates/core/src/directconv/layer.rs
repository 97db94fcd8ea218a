use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const DENSE_WIDTHS: [usize; 3] = [16, 32, 64];
pub const CONV_WIDTHS: [usize; 8] = [4, 6, 8, 10, 12, 16, 32, 64];
pub const CONV_KERNELS: [usize; 3] = [1, 3, 5];
pub const SEPARABLE_KERNELS: [usize; 2] = [3, 5];
pub const DROPOUT_RATE: f32 = 0.1;
pub const NUM_LOGITS: usize = 10;

/// Feature-map shape, height × width × channels. Dense outputs are stored as
/// a `1 × n × 1` map so every layer works on pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Shape {
    pub h: usize,
    pub w: usize,
    pub c: usize,
}

impl Shape {
    pub const CIFAR: Shape = Shape { h: 32, w: 32, c: 3 };

    pub fn new(h: usize, w: usize, c: usize) -> Self {
        Shape { h, w, c }
    }

    pub fn len(&self) -> usize {
        self.h * self.w * self.c
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn pixels(&self) -> usize {
        self.h * self.w
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.h, self.w, self.c)
    }
}

/// One layer of a serial CNN.
///
/// | text       | layer                                                   |
/// |------------|---------------------------------------------------------|
/// | `A`        | 2×2 average pool                                        |
/// | `M`        | 2×2 max pool                                            |
/// | `D(n)`     | dense, ReLU                                             |
/// | `D*`       | dense, 10 linear outputs                                |
/// | `C1(n,k)`  | k×k convolution, valid padding, stride 1, linear        |
/// | `C2(n,k)`  | k×k depthwise (multiplier 1) then 1×1 to n channels, ReLU |
/// | `Dr`       | dropout 0.1 (identity at inference)                     |
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LayerSpec {
    AvgPool,
    MaxPool,
    Dense { out: usize },
    Logits,
    Conv { out: usize, kernel: usize },
    Separable { out: usize, kernel: usize },
    Dropout,
}

impl LayerSpec {
    pub fn output_shape(&self, input: Shape) -> Result<Shape> {
        let bad = |why: &str| Err(Error::shape(format!("{self} on {input}: {why}")));
        match *self {
            LayerSpec::AvgPool | LayerSpec::MaxPool => {
                if input.h < 2 || input.w < 2 || input.h == 1 {
                    return bad("pooling needs at least 2x2");
                }
                Ok(Shape::new(input.h / 2, input.w / 2, input.c))
            }
            LayerSpec::Conv { out, kernel } | LayerSpec::Separable { out, kernel } => {
                if input.h == 1 && input.c == 1 && input.w > 1 {
                    return bad("convolution after a dense layer");
                }
                if kernel == 0 || out == 0 || input.h < kernel || input.w < kernel {
                    return bad("kernel larger than input");
                }
                Ok(Shape::new(input.h - kernel + 1, input.w - kernel + 1, out))
            }
            LayerSpec::Dense { out } => Ok(Shape::new(1, out, 1)),
            LayerSpec::Logits => Ok(Shape::new(1, NUM_LOGITS, 1)),
            LayerSpec::Dropout => Ok(input),
        }
    }

    /// Trainable parameter blocks as `(len, fan_in)`.
    pub fn param_blocks(&self, input: Shape) -> Vec<(usize, usize)> {
        let n_in = input.len();
        match *self {
            LayerSpec::Conv { out, kernel } => {
                let fan = kernel * kernel * input.c;
                vec![(fan * out, fan), (out, fan)]
            }
            LayerSpec::Separable { out, kernel } => {
                let kk = kernel * kernel;
                vec![(kk * input.c, kk), (input.c * out, input.c), (out, input.c)]
            }
            LayerSpec::Dense { out } => vec![(n_in * out, n_in), (out, n_in)],
            LayerSpec::Logits => vec![(n_in * NUM_LOGITS, n_in), (NUM_LOGITS, n_in)],
            LayerSpec::AvgPool | LayerSpec::MaxPool | LayerSpec::Dropout => vec![],
        }
    }

    pub fn param_count(&self, input: Shape) -> usize {
        self.param_blocks(input).iter().map(|b| b.0).sum()
    }

    pub fn is_trainable(&self) -> bool {
        !matches!(self, LayerSpec::AvgPool | LayerSpec::MaxPool | LayerSpec::Dropout)
    }

    /// Whether the variable parameters come from the candidate-layer domains.
    pub fn in_search_domain(&self) -> bool {
        match *self {
            LayerSpec::Dense { out } => DENSE_WIDTHS.contains(&out),
            LayerSpec::Conv { out, kernel } => {
                CONV_WIDTHS.contains(&out) && CONV_KERNELS.contains(&kernel)
            }
            LayerSpec::Separable { out, kernel } => {
                CONV_WIDTHS.contains(&out) && SEPARABLE_KERNELS.contains(&kernel)
            }
            _ => true,
        }
    }

    /// Stable small integer used by the parameter-file header.
    pub(crate) fn code(&self) -> (u32, u32, u32) {
        match *self {
            LayerSpec::AvgPool => (0, 0, 0),
            LayerSpec::MaxPool => (1, 0, 0),
            LayerSpec::Dense { out } => (2, out as u32, 0),
            LayerSpec::Logits => (3, NUM_LOGITS as u32, 0),
            LayerSpec::Conv { out, kernel } => (4, out as u32, kernel as u32),
            LayerSpec::Separable { out, kernel } => (5, out as u32, kernel as u32),
            LayerSpec::Dropout => (6, 0, 0),
        }
    }

    pub(crate) fn from_code(kind: u32, out: u32, kernel: u32) -> Result<Self> {
        let (out, kernel) = (out as usize, kernel as usize);
        Ok(match kind {
            0 => LayerSpec::AvgPool,
            1 => LayerSpec::MaxPool,
            2 => LayerSpec::Dense { out },
            3 => LayerSpec::Logits,
            4 => LayerSpec::Conv { out, kernel },
            5 => LayerSpec::Separable { out, kernel },
            6 => LayerSpec::Dropout,
            other => return Err(Error::Format(format!("unknown layer code {other}"))),
        })
    }
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerSpec::AvgPool => write!(f, "A"),
            LayerSpec::MaxPool => write!(f, "M"),
            LayerSpec::Dense { out } => write!(f, "D({out})"),
            LayerSpec::Logits => write!(f, "D*"),
            LayerSpec::Conv { out, kernel } => write!(f, "C1({out},{kernel})"),
            LayerSpec::Separable { out, kernel } => write!(f, "C2({out},{kernel})"),
            LayerSpec::Dropout => write!(f, "Dr"),
        }
    }
}

fn parse_args(s: &str, want: usize) -> Result<Vec<usize>> {
    let inner = s
        .strip_prefix('(')
        .and_then(|r| r.strip_suffix(')'))
        .ok_or_else(|| Error::invalid(format!("expected parenthesised arguments in {s:?}")))?;
    let vals = inner
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<usize>()
                .map_err(|_| Error::invalid(format!("bad layer argument {v:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    if vals.len() != want {
        return Err(Error::invalid(format!(
            "{s:?}: expected {want} arguments, got {}",
            vals.len()
        )));
    }
    Ok(vals)
}

impl FromStr for LayerSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        match s.as_str() {
            "A" => return Ok(LayerSpec::AvgPool),
            "M" => return Ok(LayerSpec::MaxPool),
            "D*" => return Ok(LayerSpec::Logits),
            "Dr" => return Ok(LayerSpec::Dropout),
            _ => {}
        }
        if let Some(rest) = s.strip_prefix("C1") {
            let v = parse_args(rest, 2)?;
            return Ok(LayerSpec::Conv {
                out: v[0],
                kernel: v[1],
            });
        }
        if let Some(rest) = s.strip_prefix("C2") {
            let v = parse_args(rest, 2)?;
            return Ok(LayerSpec::Separable {
                out: v[0],
                kernel: v[1],
            });
        }
        if let Some(rest) = s.strip_prefix('D') {
            let v = parse_args(rest, 1)?;
            return Ok(LayerSpec::Dense { out: v[0] });
        }
        Err(Error::invalid(format!("unknown layer {s:?}")))
    }
}

/// Splits `A,C1(6,3),M` at top-level commas.
pub fn split_layers(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let (mut depth, mut start) = (0i32, 0usize);
    for (i, ch) in text.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(text[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    let last = text[start..].trim();
    if !last.is_empty() || !out.is_empty() {
        out.push(last);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_follow_valid_padding_and_pooling() {
        let s = LayerSpec::AvgPool.output_shape(Shape::CIFAR).unwrap();
        assert_eq!(s, Shape::new(16, 16, 3));
        let s = LayerSpec::Conv { out: 64, kernel: 3 }.output_shape(s).unwrap();
        assert_eq!(s, Shape::new(14, 14, 64));
        let s = LayerSpec::MaxPool.output_shape(s).unwrap();
        assert_eq!(s, Shape::new(7, 7, 64));
        assert!(LayerSpec::Conv { out: 4, kernel: 5 }
            .output_shape(Shape::new(3, 3, 4))
            .is_err());
        assert_eq!(
            LayerSpec::Logits.output_shape(s).unwrap(),
            Shape::new(1, 10, 1)
        );
    }

    #[test]
    fn parameter_counts() {
        let i = Shape::new(16, 16, 3);
        assert_eq!(LayerSpec::Conv { out: 64, kernel: 3 }.param_count(i), 1792);
        // depthwise 27 + pointwise 48 + bias 16
        assert_eq!(LayerSpec::Separable { out: 16, kernel: 3 }.param_count(i), 91);
        assert_eq!(LayerSpec::Logits.param_count(Shape::new(5, 5, 32)), 8010);
        assert_eq!(LayerSpec::MaxPool.param_count(i), 0);
    }

    #[test]
    fn text_round_trip() {
        for s in ["A", "M", "D(32)", "D*", "C1(6,3)", "C2(64,5)", "Dr"] {
            assert_eq!(s.parse::<LayerSpec>().unwrap().to_string(), s);
        }
        assert_eq!(
            " C1( 8 , 1 )".parse::<LayerSpec>().unwrap(),
            LayerSpec::Conv { out: 8, kernel: 1 }
        );
        assert!("C3(4,3)".parse::<LayerSpec>().is_err());
        assert!("C1(4)".parse::<LayerSpec>().is_err());
        assert!("D(x)".parse::<LayerSpec>().is_err());
    }

    #[test]
    fn split_respects_parentheses() {
        assert_eq!(
            split_layers("A,C1(6,3), M ,D*"),
            vec!["A", "C1(6,3)", "M", "D*"]
        );
        assert!(split_layers("").is_empty());
    }
}
