use serde::{Deserialize, Serialize, Serializer};
use std::fmt;
use std::ops::Add;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub const fn new(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        ConfusionMatrix { tp, fp, fn_, tn }
    }

    pub fn n(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// Record one case.
    pub fn tally(&mut self, prediction: bool, truth: bool) {
        match (prediction, truth) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }
}

impl Add for ConfusionMatrix {
    type Output = ConfusionMatrix;

    fn add(self, o: ConfusionMatrix) -> ConfusionMatrix {
        ConfusionMatrix::new(self.tp + o.tp, self.fp + o.fp, self.fn_ + o.fn_, self.tn + o.tn)
    }
}

impl fmt::Display for ConfusionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, {})", self.tp, self.fp, self.fn_, self.tn)
    }
}

/// A percentage held in tenths of a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Deserialize)]
#[serde(from = "f64")]
pub struct Percent(pub u32);

impl Percent {
    /// `100 * num / den` rounded half-up to one decimal; `None` when `den == 0`.
    pub fn of(num: u64, den: u64) -> Option<Percent> {
        if den == 0 {
            return None;
        }
        let (num, den) = (num as u128, den as u128);
        Some(Percent(((2 * num * 1000 + den) / (2 * den)) as u32))
    }

    pub fn tenths(self) -> u32 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / 10.0
    }
}

impl From<f64> for Percent {
    fn from(v: f64) -> Self {
        Percent((v * 10.0).round() as u32)
    }
}

impl Serialize for Percent {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.as_f64())
    }
}

impl fmt::Display for Percent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.0 / 10, self.0 % 10)
    }
}

/// Precision, recall, F1 and accuracy; a ratio with a zero denominator is absent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub precision: Option<Percent>,
    pub recall: Option<Percent>,
    pub f1: Option<Percent>,
    pub accuracy: Option<Percent>,
}

impl MetricsReport {
    pub fn cells(&self) -> [Option<Percent>; 4] {
        [self.precision, self.recall, self.f1, self.accuracy]
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cells: Vec<String> = self
            .cells()
            .iter()
            .map(|c| c.map(|p| p.to_string()).unwrap_or_else(|| "-".into()))
            .collect();
        f.write_str(&cells.join("/"))
    }
}

pub fn metrics(cm: &ConfusionMatrix) -> MetricsReport {
    MetricsReport {
        precision: Percent::of(cm.tp, cm.tp + cm.fp),
        recall: Percent::of(cm.tp, cm.tp + cm.fn_),
        f1: Percent::of(2 * cm.tp, 2 * cm.tp + cm.fp + cm.fn_),
        accuracy: Percent::of(cm.tp + cm.tn, cm.n()),
    }
}

/// Cell-wise sum.
pub fn micro_average(cms: &[ConfusionMatrix]) -> ConfusionMatrix {
    cms.iter().copied().fold(ConfusionMatrix::default(), Add::add)
}
