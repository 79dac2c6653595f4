//! Named suites: each runs a fixed list of games and collects the records.

use crate::adversary::{BestMsi, CoinFlip, HotpCompromise, MsiAdversary};
use crate::games::{self, legacy, GameConfig, KiTarget, SharingBackend, TamperStrategy};
use crate::legacy::OTP_MODULUS;
use crate::report::{GameRecord, Kind, Report, Verdict};
use crate::scheme::{GameError, Scheme};

pub const SUITES: [&str; 7] = [
    "all",
    "msi",
    "ind-cma",
    "fungibility",
    "ki",
    "integrity",
    "share-format",
];

#[derive(Clone, Copy, Debug)]
pub struct SuiteConfig {
    pub trials: u64,
    pub seed: [u8; 32],
    pub queries: usize,
    pub tamper_trials: u64,
    pub share_samples: u64,
    /// Residues per trial in the empirical bias diagnostic.
    pub offset_samples: u64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            trials: 2000,
            seed: [0; 32],
            queries: 50,
            tamper_trials: 100_000,
            share_samples: 100_000,
            offset_samples: 100_000,
        }
    }
}

impl SuiteConfig {
    fn game(&self) -> GameConfig {
        GameConfig {
            trials: self.trials,
            seed: self.seed,
            queries: self.queries,
        }
    }
}

fn msi(cfg: &SuiteConfig, out: &mut Vec<GameRecord>) -> Result<(), GameError> {
    let g = cfg.game();
    let defenses: [(&str, &dyn MsiAdversary); 3] = [
        ("msi/coin-flip", &CoinFlip),
        ("msi/best", &BestMsi),
        ("msi/hotp-compromise", &HotpCompromise),
    ];
    for (name, adv) in defenses {
        let a = games::run_msi_game(Scheme::Mfkdf2, adv, &g)?;
        out.push(
            GameRecord::advantage(name, "mfkdf2", Kind::Defense, &a)
                .note(format!("adversary {}", adv.name())),
        );
    }
    let s = legacy(&["xor-share-encryption"]);
    let a = games::run_msi_game(s, &HotpCompromise, &g)?;
    out.push(GameRecord::advantage(
        "msi/hotp-compromise",
        &s.label(),
        Kind::Attack,
        &a,
    ));
    Ok(())
}

fn ind_cma(cfg: &SuiteConfig, out: &mut Vec<GameRecord>) -> Result<(), GameError> {
    let g = cfg.game();
    let t = games::run_two_time_pad(Scheme::Mfkdf2, cfg.trials, &cfg.seed)?;
    out.push(
        GameRecord::advantage(
            "ind-cma/two-time-pad",
            "mfkdf2",
            Kind::Defense,
            &t.advantage,
        )
        .note(format!("pad matches {} of {}", t.pad_matches, cfg.trials)),
    );
    let a = games::run_factor_ind_cma_passive(Scheme::Mfkdf2, &g)?;
    out.push(GameRecord::advantage(
        "ind-cma/passive",
        "mfkdf2",
        Kind::Defense,
        &a,
    ));
    let s = legacy(&["xor-share-encryption", "no-share-regeneration"]);
    let t = games::run_two_time_pad(s, cfg.trials, &cfg.seed)?;
    out.push(GameRecord::advantage(
        "ind-cma/two-time-pad",
        &s.label(),
        Kind::Attack,
        &t.advantage,
    ));
    out.push(GameRecord::rate(
        "ind-cma/pad-match",
        &s.label(),
        Kind::Attack,
        true,
        cfg.trials,
        t.pad_matches,
    ));
    Ok(())
}

fn fungibility(cfg: &SuiteConfig, out: &mut Vec<GameRecord>) -> Result<(), GameError> {
    let vaults = (cfg.trials / 100).max(1);
    for (scheme, kind, expect_one) in [
        (Scheme::Mfkdf2, Kind::Defense, false),
        (legacy(&["xor-share-combine"]), Kind::Attack, true),
    ] {
        let r = games::run_fungibility(scheme, 4, vaults, &cfg.seed)?;
        out.push(
            GameRecord::rate(
                "fungibility/permuted-witnesses",
                &scheme.label(),
                kind,
                expect_one,
                r.trials,
                r.hits,
            )
            .note(format!("{vaults} vaults per size, n = 2..4")),
        );
    }
    Ok(())
}

fn ki(cfg: &SuiteConfig, out: &mut Vec<GameRecord>) -> Result<(), GameError> {
    let g = cfg.game();
    for (name, target) in [
        ("ki/totp-oracle", KiTarget::OracleTotp),
        ("ki/static-password", KiTarget::StaticPassword),
    ] {
        let r = games::run_factor_ki(target, &g)?;
        let mut rec = GameRecord::advantage(name, "mfkdf2", Kind::Defense, &r.advantage);
        if r.identical_views {
            rec = rec.note("views identical in both worlds; exact advantage 0");
        }
        out.push(rec);
    }
    let exact = games::exact_residue_bias(OTP_MODULUS, true);
    out.push(GameRecord::exact(
        "ki/residue-bias-exact",
        "mfkdf2",
        Kind::Defense,
        "total variation",
        exact.tv_distance,
    ));
    let raw = games::exact_residue_bias(OTP_MODULUS, false);
    let s = legacy(&["raw-mod-otp-bias"]);
    out.push(
    GameRecord::exact("ki/residue-bias-exact", &s.label(), Kind::Attack, "total variation", raw.tv_distance)
      .note(format!(
        "low residues [0, {}) have probability {:.9} against {:.9}; counting advantage {:.2e} at 1e6 samples",
        raw.low_cells,
        raw.p_low,
        raw.p_low_uniform,
        raw.frequency_advantage(1_000_000)
      )),
  );
    let f = games::run_residue_frequency(
        false,
        cfg.offset_samples,
        (cfg.trials / 20).max(1),
        &cfg.seed,
    );
    let verdict = if f.power < 0.5 {
        Verdict::Inconclusive
    } else if f.advantage.lower > crate::report::NEGLIGIBLE {
        Verdict::Reproduced
    } else {
        Verdict::NotReproduced
    };
    out.push(
        GameRecord::diagnostic(
            "ki/residue-frequency",
            &s.label(),
            "advantage",
            f.advantage.estimate,
            verdict,
        )
        .with_trials(f.advantage.trials)
        .note(format!(
            "{} residues per trial, test power {:.3}",
            f.samples, f.power
        )),
    );
    Ok(())
}

fn integrity(cfg: &SuiteConfig, out: &mut Vec<GameRecord>) -> Result<(), GameError> {
    let m = Scheme::Mfkdf2;
    let r = games::run_state_integrity(
        m,
        TamperStrategy::RandomBytes { max_bytes: 8 },
        cfg.tamper_trials,
        &cfg.seed,
    )?;
    out.push(GameRecord::rate(
        "integrity/random-bytes",
        "mfkdf2",
        Kind::Defense,
        false,
        r.trials,
        r.hits,
    ));
    let r = games::run_state_integrity(m, TamperStrategy::SingleByteSweep, 0, &cfg.seed)?;
    out.push(GameRecord::rate(
        "integrity/single-byte-sweep",
        "mfkdf2",
        Kind::Defense,
        false,
        r.trials,
        r.hits,
    ));
    let dilution = (cfg.trials / 20).max(1);
    let r = games::run_state_integrity(m, TamperStrategy::ShareDilution, dilution, &cfg.seed)?;
    out.push(GameRecord::rate(
        "integrity/share-dilution",
        "mfkdf2",
        Kind::Defense,
        false,
        r.trials,
        r.hits,
    ));
    let s = legacy(&["no-state-mac"]);
    let r = games::run_state_integrity(s, TamperStrategy::ShareDilution, dilution, &cfg.seed)?;
    let mut rec = GameRecord::rate(
        "integrity/share-dilution",
        &s.label(),
        Kind::Attack,
        true,
        r.trials,
        r.hits,
    );
    rec.notes = r.notes;
    out.push(rec);
    let r = games::run_state_integrity(m, TamperStrategy::NoOp, dilution, &cfg.seed)?;
    out.push(GameRecord::rate(
        "integrity/no-op",
        "mfkdf2",
        Kind::Defense,
        true,
        r.trials,
        r.hits,
    ));
    Ok(())
}

fn share_format(cfg: &SuiteConfig, out: &mut Vec<GameRecord>) {
    for (backend, scheme, kind) in [
        (SharingBackend::Gf256, "mfkdf2".to_string(), Kind::Defense),
        (
            SharingBackend::PrimeField,
            legacy(&["biased-share-format"]).label(),
            Kind::Attack,
        ),
    ] {
        let r = games::measure_share_format_bias(backend, cfg.share_samples, 1e-3, &cfg.seed);
        let rec = GameRecord::chi_square(
            "share-format/byte-uniformity",
            &scheme,
            kind,
            r.samples,
            r.failing.len(),
            r.uniform,
        );
        out.push(if r.failing.is_empty() {
            rec
        } else {
            rec.note(format!("non-uniform positions {:?}", r.failing))
        });
    }
}

pub fn run_suite(name: &str, cfg: &SuiteConfig) -> Result<Report, GameError> {
    let all = name == "all";
    if !SUITES.contains(&name) {
        return Err(GameError::Setup(format!(
            "unknown suite {name:?}; expected one of {}",
            SUITES.join(", ")
        )));
    }
    let mut records = Vec::new();
    if all || name == "msi" {
        msi(cfg, &mut records)?;
    }
    if all || name == "ind-cma" {
        ind_cma(cfg, &mut records)?;
    }
    if all || name == "fungibility" {
        fungibility(cfg, &mut records)?;
    }
    if all || name == "ki" {
        ki(cfg, &mut records)?;
    }
    if all || name == "integrity" {
        integrity(cfg, &mut records)?;
    }
    if all || name == "share-format" {
        share_format(cfg, &mut records);
    }
    Ok(Report {
        suite: name.into(),
        seed: hex::encode(cfg.seed),
        records,
    })
}
