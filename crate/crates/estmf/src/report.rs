//! Game records and the suite report.

use serde::Serialize;

use crate::stats::Advantage;

/// Advantages below this are negligible; attack advantages must clear it.
pub const NEGLIGIBLE: f64 = 0.05;
/// Fewer trials than this cannot support a PASS on an advantage.
pub const MIN_TRIALS: u64 = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Pass,
    Fail,
    Reproduced,
    NotReproduced,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Reproduced => "REPRODUCED",
            Verdict::NotReproduced => "NOT_REPRODUCED",
            Verdict::Inconclusive => "INCONCLUSIVE",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Defense,
    Attack,
    Diagnostic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Expectation {
    AdvantageNegligible,
    AdvantageNonNegligible,
    RateZero,
    RateOne,
    ChiSquarePass,
    ChiSquareFail,
    ExactZero,
    ExactPositive,
}

#[derive(Clone, Debug, Serialize)]
pub struct GameRecord {
    pub name: String,
    pub scheme: String,
    pub kind: Kind,
    pub expectation: Expectation,
    pub trials: u64,
    pub metric: String,
    pub value: f64,
    pub interval: Option<(f64, f64)>,
    pub verdict: Verdict,
    pub notes: Vec<String>,
}

fn success(kind: Kind, ok: bool) -> Verdict {
    match (kind, ok) {
        (Kind::Attack, true) => Verdict::Reproduced,
        (Kind::Attack, false) => Verdict::NotReproduced,
        (_, true) => Verdict::Pass,
        (_, false) => Verdict::Fail,
    }
}

impl GameRecord {
    fn new(
        name: &str,
        scheme: &str,
        kind: Kind,
        expectation: Expectation,
        metric: &str,
    ) -> GameRecord {
        GameRecord {
            name: name.into(),
            scheme: scheme.into(),
            kind,
            expectation,
            trials: 0,
            metric: metric.into(),
            value: 0.0,
            interval: None,
            verdict: Verdict::Inconclusive,
            notes: Vec::new(),
        }
    }

    /// Defenses need enough trials and an interval that holds 0 and stays
    /// below the negligible bound; attacks need the whole interval above it.
    pub fn advantage(name: &str, scheme: &str, kind: Kind, adv: &Advantage) -> GameRecord {
        let expectation = match kind {
            Kind::Attack => Expectation::AdvantageNonNegligible,
            _ => Expectation::AdvantageNegligible,
        };
        let mut r = GameRecord::new(name, scheme, kind, expectation, "advantage");
        r.trials = adv.trials;
        r.value = adv.estimate;
        r.interval = Some((adv.lower, adv.upper));
        r.verdict = match kind {
            Kind::Attack => success(kind, adv.lower > NEGLIGIBLE),
            _ if adv.trials < MIN_TRIALS => Verdict::Inconclusive,
            _ => success(kind, adv.contains_zero() && adv.upper < NEGLIGIBLE),
        };
        r
    }

    /// A rate that must be exactly 0 or exactly 1.
    pub fn rate(
        name: &str,
        scheme: &str,
        kind: Kind,
        expect_one: bool,
        trials: u64,
        hits: u64,
    ) -> GameRecord {
        let expectation = if expect_one {
            Expectation::RateOne
        } else {
            Expectation::RateZero
        };
        let mut r = GameRecord::new(name, scheme, kind, expectation, "rate");
        r.trials = trials;
        r.value = if trials == 0 {
            0.0
        } else {
            hits as f64 / trials as f64
        };
        r.verdict = if trials == 0 {
            Verdict::Inconclusive
        } else {
            success(
                kind,
                if expect_one {
                    hits == trials
                } else {
                    hits == 0
                },
            )
        };
        r
    }

    /// `uniform` is None when the sample was too small to test.
    pub fn chi_square(
        name: &str,
        scheme: &str,
        kind: Kind,
        samples: u64,
        failing: usize,
        uniform: Option<bool>,
    ) -> GameRecord {
        let expect_pass = kind != Kind::Attack;
        let expectation = if expect_pass {
            Expectation::ChiSquarePass
        } else {
            Expectation::ChiSquareFail
        };
        let mut r = GameRecord::new(name, scheme, kind, expectation, "failing byte positions");
        r.trials = samples;
        r.value = failing as f64;
        r.verdict = match uniform {
            None => Verdict::Inconclusive,
            Some(u) => success(kind, u == expect_pass),
        };
        r
    }

    /// A quantity computed exactly rather than estimated.
    pub fn exact(name: &str, scheme: &str, kind: Kind, metric: &str, value: f64) -> GameRecord {
        let expect_zero = kind != Kind::Attack;
        let expectation = if expect_zero {
            Expectation::ExactZero
        } else {
            Expectation::ExactPositive
        };
        let mut r = GameRecord::new(name, scheme, kind, expectation, metric);
        r.value = value;
        r.verdict = success(kind, (value == 0.0) == expect_zero);
        r
    }

    pub fn diagnostic(
        name: &str,
        scheme: &str,
        metric: &str,
        value: f64,
        verdict: Verdict,
    ) -> GameRecord {
        let mut r = GameRecord::new(
            name,
            scheme,
            Kind::Diagnostic,
            Expectation::AdvantageNegligible,
            metric,
        );
        r.value = value;
        r.verdict = verdict;
        r
    }

    pub fn with_trials(mut self, trials: u64) -> GameRecord {
        self.trials = trials;
        self
    }

    pub fn note(mut self, n: impl Into<String>) -> GameRecord {
        self.notes.push(n.into());
        self
    }

    pub fn expected(&self) -> bool {
        match self.kind {
            Kind::Defense => self.verdict == Verdict::Pass,
            Kind::Attack => self.verdict == Verdict::Reproduced,
            Kind::Diagnostic => true,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Report {
    pub suite: String,
    pub seed: String,
    pub records: Vec<GameRecord>,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Every defense passed and every attack was reproduced.
    pub fn all_expected(&self) -> bool {
        self.records.iter().all(GameRecord::expected)
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            let interval = r
                .interval
                .map(|(l, u)| format!(" [{l:.4}, {u:.4}]"))
                .unwrap_or_default();
            out.push_str(&format!(
                "{:<15} {:<40} {:<48} {} = {:.6}{interval} (n = {})\n",
                r.verdict.as_str(),
                r.name,
                r.scheme,
                r.metric,
                r.value,
                r.trials
            ));
            for n in &r.notes {
                out.push_str(&format!("{:<15} {n}\n", ""));
            }
        }
        out
    }
}
