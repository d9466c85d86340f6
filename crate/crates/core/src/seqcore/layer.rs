use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the activation output `y`.
    #[inline]
    pub fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerKind {
    Dense { activation: Activation },
    Lstm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    #[serde(flatten)]
    pub kind: LayerKind,
    pub input_width: usize,
    pub output_width: usize,
}

impl LayerSpec {
    pub fn dense(input_width: usize, output_width: usize, activation: Activation) -> Self {
        LayerSpec {
            kind: LayerKind::Dense { activation },
            input_width,
            output_width,
        }
    }

    pub fn lstm(input_width: usize, output_width: usize) -> Self {
        LayerSpec {
            kind: LayerKind::Lstm,
            input_width,
            output_width,
        }
    }

    pub fn is_lstm(&self) -> bool {
        matches!(self.kind, LayerKind::Lstm)
    }

    pub fn param_count(&self) -> usize {
        let (i, o) = (self.input_width, self.output_width);
        match self.kind {
            LayerKind::Dense { .. } => i * o + o,
            LayerKind::Lstm => 4 * (i * o + o * o + o),
        }
    }

    /// Width of the recurrent state carried by this layer (cell + hidden).
    pub fn state_width(&self) -> usize {
        if self.is_lstm() {
            2 * self.output_width
        } else {
            0
        }
    }
}

/// Checks that a layer list is non-empty, has positive widths and chains.
pub fn validate_specs(specs: &[LayerSpec]) -> Result<()> {
    if specs.is_empty() {
        return Err(Error::spec("network needs at least one layer"));
    }
    for (i, l) in specs.iter().enumerate() {
        if l.input_width == 0 || l.output_width == 0 {
            return Err(Error::spec(format!("layer {i} has a zero width")));
        }
    }
    for (i, pair) in specs.windows(2).enumerate() {
        if pair[0].output_width != pair[1].input_width {
            return Err(Error::spec(format!(
                "layer {} outputs {} values but layer {} expects {}",
                i,
                pair[0].output_width,
                i + 1,
                pair[1].input_width
            )));
        }
    }
    Ok(())
}

/// Marker for a width in a preset list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Width {
    Dense(usize),
    Lstm(usize),
}

/// Expands a unit-count list such as `{in, 64, 64, 32, L32, L32, 32, 64, 64, out}`
/// into chained layers. Hidden dense layers use tanh; the last layer is linear.
pub fn specs_from_widths(widths: &[Width]) -> Result<Vec<LayerSpec>> {
    if widths.len() < 2 {
        return Err(Error::spec("width list needs an input and an output entry"));
    }
    let size = |w: &Width| match *w {
        Width::Dense(n) | Width::Lstm(n) => n,
    };
    if matches!(widths[0], Width::Lstm(_)) {
        return Err(Error::spec("the input entry cannot be an LSTM layer"));
    }
    let last = widths.len() - 1;
    let specs = widths
        .windows(2)
        .enumerate()
        .map(|(i, pair)| {
            let (a, b) = (size(&pair[0]), size(&pair[1]));
            match pair[1] {
                Width::Lstm(_) => LayerSpec::lstm(a, b),
                Width::Dense(_) if i + 1 == last => LayerSpec::dense(a, b, Activation::Identity),
                Width::Dense(_) => LayerSpec::dense(a, b, Activation::Tanh),
            }
        })
        .collect::<Vec<_>>();
    validate_specs(&specs)?;
    Ok(specs)
}

/// Hidden widths of the small default network, between input and output.
pub fn desk_hidden() -> Vec<Width> {
    use Width::*;
    vec![
        Dense(64),
        Dense(64),
        Dense(32),
        Lstm(32),
        Lstm(32),
        Dense(32),
        Dense(64),
        Dense(64),
    ]
}

/// Hidden widths of the full-size network used on the robots.
pub fn full_hidden() -> Vec<Width> {
    use Width::*;
    vec![
        Dense(500),
        Dense(300),
        Dense(100),
        Lstm(100),
        Lstm(100),
        Dense(100),
        Dense(300),
        Dense(500),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkPreset {
    /// Small widths that train in minutes on a CPU.
    #[default]
    Desk,
    /// Full-size widths.
    #[serde(rename = "paper")]
    Full,
}

impl NetworkPreset {
    pub fn hidden(self) -> Vec<Width> {
        match self {
            NetworkPreset::Desk => desk_hidden(),
            NetworkPreset::Full => full_hidden(),
        }
    }
}

pub fn with_io(input: usize, hidden: &[Width], output: usize) -> Vec<Width> {
    let mut w = Vec::with_capacity(hidden.len() + 2);
    w.push(Width::Dense(input));
    w.extend_from_slice(hidden);
    w.push(Width::Dense(output));
    w
}
