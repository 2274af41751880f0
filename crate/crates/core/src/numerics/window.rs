use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    Hann,
    Rect,
}

impl Window {
    /// Periodic (DFT-even) coefficients of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Rect => vec![1.0; n],
            Window::Hann => (0..n)
                .map(|i| {
                    let x = std::f64::consts::PI * i as f64 / n as f64;
                    x.sin().powi(2)
                })
                .collect(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Window::Hann => "hann",
            Window::Rect => "rect",
        }
    }
}

impl std::str::FromStr for Window {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "hann" => Ok(Window::Hann),
            "rect" | "rectangular" | "boxcar" => Ok(Window::Rect),
            other => Err(format!("unknown window `{other}` (expected hann or rect)")),
        }
    }
}
