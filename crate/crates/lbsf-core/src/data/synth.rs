//! Seeded synthetic dataset generator.
//!
//! Negative users draw stationary behavior from a personal merchant pool.
//! Positive users carry one of two planted signals:
//!
//! * pattern A ("lifestyle shift"): spending at a luxury merchant declines
//!   mid-window while a consumer-finance merchant appears and basic
//!   consumption rises;
//! * pattern B ("impulsive surge"): transaction frequency at one
//!   entertainment merchant ramps super-linearly, with the final week at the
//!   surge peak (default 11 per week).
//!
//! A share of negative users are deliberate confusers — stable finance,
//! entertainment, or luxury patrons — so mere merchant presence does not
//! separate the classes; the trajectory within merchants does. Each user's
//! observation window start is jittered so absolute calendar position is not
//! a shortcut either.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Poisson};

use super::{DataError, Dataset, PaymentBehavior, Split, UserRecord};

const DAY: i64 = 86_400;
const WEEK: i64 = 7 * DAY;
/// 2021-01-04T00:00:00Z (a Monday).
const BASE_EPOCH: i64 = 1_609_718_400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum MerchantTier {
    Luxury,
    Basic,
    Transport,
    Entertainment,
    Finance,
}

/// Fixed catalog of merchant archetypes, grouped into tiers.
pub fn merchant_catalog() -> Vec<(&'static str, MerchantTier)> {
    use MerchantTier::*;
    vec![
        ("Maison Aurum Fine Dining", Luxury),
        ("Gilded Plate Restaurant", Luxury),
        ("Skyline Rooftop Lounge", Luxury),
        ("Velvet Jewelry House", Luxury),
        ("Premier Flight Booking", Luxury),
        ("Grand Vista Resort Hotels", Luxury),
        ("Couture Fashion Atelier", Luxury),
        ("Vintage Cellar Wines", Luxury),
        ("Daily Fresh Grocery", Basic),
        ("Corner Convenience Store", Basic),
        ("Sunrise Bakery", Basic),
        ("Neighborhood Wet Market", Basic),
        ("Value Supermarket", Basic),
        ("Quick Noodle Stand", Basic),
        ("Morning Soy Milk Shop", Basic),
        ("Budget Pharmacy", Basic),
        ("Street Barbecue Stall", Basic),
        ("Campus Canteen", Basic),
        ("City Subway Pass", Transport),
        ("Metro Bus Card", Transport),
        ("Shared Bike Rides", Transport),
        ("Ride Hailing Service", Transport),
        ("Intercity Train Tickets", Transport),
        ("Airport Shuttle Line", Transport),
        ("Starlight Live Streaming", Entertainment),
        ("Galaxy Game Arcade", Entertainment),
        ("Midnight Food Delivery", Entertainment),
        ("Cloud Cinema Tickets", Entertainment),
        ("Pocket Comics App", Entertainment),
        ("Karaoke Palace", Entertainment),
        ("Lucky Claw Machines", Entertainment),
        ("Beat Music Streaming", Entertainment),
        ("Easy Consumer Finance", Finance),
        ("Installment Pay Service", Finance),
        ("Micro Loan Express", Finance),
        ("Credit Booster App", Finance),
        ("Flexi Wallet Advance", Finance),
    ]
}

/// Generic purchase descriptions shared by every tier. Most descriptions are
/// generic; the crisp tier signal lives in the merchant name, which only
/// enters the model through merchant-level folding.
const GENERIC_DESCRIPTIONS: &[&str] = &[
    "order",
    "payment",
    "weekly order",
    "purchase",
    "top up",
    "online order",
    "checkout",
    "repeat order",
];

fn descriptions(tier: MerchantTier) -> &'static [&'static str] {
    use MerchantTier::*;
    match tier {
        Luxury => &["dinner reservation", "tasting menu", "boutique purchase"],
        Basic => &["groceries", "breakfast", "household goods"],
        Transport => &["fare", "ride order", "card top up"],
        Entertainment => &["tip for streamer", "game coins", "virtual gift"],
        Finance => &["installment repayment", "credit drawdown", "account fee"],
    }
}

/// Planted ground-truth pattern of a positive user.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum PlantedPattern {
    LifestyleShift,
    ImpulsiveSurge,
}

/// Generator ground truth for one user, for diagnostics and acceptance
/// checks; not part of the JSONL schema.
#[derive(Debug, Clone)]
pub struct UserTruth {
    pub user_id: String,
    pub label: u8,
    pub pattern: Option<PlantedPattern>,
    /// Merchant carrying the pattern-B surge, when applicable.
    pub surge_merchant: Option<String>,
    /// Declining luxury merchant of pattern A, when applicable.
    pub shift_merchant: Option<String>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthesisConfig {
    pub n_users: usize,
    /// Fraction of users labeled positive, filled by exact quota.
    pub positive_rate: f64,
    /// Observation window length; 45, 90, and 180 are the supported spans.
    pub t_span_days: u32,
    /// Target rate of the stationary part of each user's activity.
    pub mean_behaviors_per_day: f64,
    pub seed: u64,
    /// Fraction of positives given pattern A (lifestyle shift); the rest get
    /// pattern B (impulsive surge). Must sum to 1 with `pattern_b_fraction`.
    pub pattern_a_fraction: f64,
    pub pattern_b_fraction: f64,
    /// Weekly transaction count at the surge merchant in the peak week.
    pub surge_peak_per_week: u32,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        SynthesisConfig {
            n_users: 1000,
            positive_rate: 0.10,
            t_span_days: 90,
            mean_behaviors_per_day: 1.5,
            seed: 7,
            pattern_a_fraction: 0.5,
            pattern_b_fraction: 0.5,
            surge_peak_per_week: 11,
        }
    }
}

impl SynthesisConfig {
    pub fn validate(&self) -> Result<(), DataError> {
        if self.n_users == 0 {
            return Err(DataError::EmptyDataset);
        }
        if !(self.positive_rate > 0.0 && self.positive_rate < 1.0) {
            return Err(DataError::InvalidConfig("positive_rate must be in (0,1)".into()));
        }
        if ![45, 90, 180].contains(&self.t_span_days) {
            return Err(DataError::InvalidConfig("t_span_days must be one of {45, 90, 180}".into()));
        }
        if (self.pattern_a_fraction + self.pattern_b_fraction - 1.0).abs() > 1e-9 {
            return Err(DataError::InvalidConfig("pattern fractions must sum to 1".into()));
        }
        if self.mean_behaviors_per_day <= 0.0 {
            return Err(DataError::InvalidConfig("mean_behaviors_per_day must be > 0".into()));
        }
        Ok(())
    }
}

/// Deterministic synthetic dataset for `cfg`. See module docs for the
/// planted patterns.
pub fn generate_synthetic(cfg: &SynthesisConfig) -> Result<Dataset, DataError> {
    Ok(generate_synthetic_with_truth(cfg)?.0)
}

/// As [`generate_synthetic`], additionally returning per-user ground truth.
pub fn generate_synthetic_with_truth(
    cfg: &SynthesisConfig,
) -> Result<(Dataset, Vec<UserTruth>), DataError> {
    cfg.validate()?;
    let mut rng = rand::SeedableRng::seed_from_u64(cfg.seed);
    let rng: &mut ChaCha8Rng = &mut rng;

    // Exact quota of positives, pattern split by quota as well, then the
    // label sequence is shuffled so labels are not position-coded.
    let n_pos = ((cfg.n_users as f64) * cfg.positive_rate).round() as usize;
    let n_a = ((n_pos as f64) * cfg.pattern_a_fraction).round() as usize;
    let mut assignments: Vec<Option<PlantedPattern>> = Vec::with_capacity(cfg.n_users);
    for i in 0..cfg.n_users {
        assignments.push(if i < n_a {
            Some(PlantedPattern::LifestyleShift)
        } else if i < n_pos {
            Some(PlantedPattern::ImpulsiveSurge)
        } else {
            None
        });
    }
    assignments.shuffle(rng);

    let id_width = cfg.n_users.max(10).ilog10() as usize + 1;
    let mut records = Vec::with_capacity(cfg.n_users);
    let mut truths = Vec::with_capacity(cfg.n_users);
    for (i, pattern) in assignments.iter().enumerate() {
        let user_id = format!("u{:0width$}", i, width = id_width);
        let (behaviors, truth) = generate_user(cfg, rng, &user_id, *pattern);
        truths.push(truth);
        records.push(UserRecord::new(user_id, Some(u8::from(pattern.is_some())), behaviors));
    }
    Ok((Dataset::new(records, Split::Train), truths))
}

struct MerchantPlan {
    name: String,
    tier: MerchantTier,
    /// Expected transaction count per week, per week index.
    weekly_rate: Vec<f64>,
    /// Exact per-week counts overriding the Poisson draw (surge ramp).
    exact_counts: Option<Vec<u32>>,
}

fn generate_user(
    cfg: &SynthesisConfig,
    rng: &mut ChaCha8Rng,
    user_id: &str,
    pattern: Option<PlantedPattern>,
) -> (Vec<PaymentBehavior>, UserTruth) {
    use MerchantTier::*;
    let weeks = (cfg.t_span_days as usize) / 7;
    let window_start = BASE_EPOCH + rng.gen_range(0..45 * DAY / WEEK * WEEK);

    let catalog = merchant_catalog();
    let by_tier = |tier: MerchantTier| -> Vec<&(&str, MerchantTier)> {
        catalog.iter().filter(|(_, t)| *t == tier).collect()
    };
    let pick = |tier: MerchantTier, rng: &mut ChaCha8Rng| -> (String, MerchantTier) {
        let options = by_tier(tier);
        let (name, t) = options[rng.gen_range(0..options.len())];
        (name.to_string(), *t)
    };

    let mut plans: Vec<MerchantPlan> = Vec::new();
    let mut used: Vec<String> = Vec::new();
    let add_unique = |plans: &mut Vec<MerchantPlan>,
                          used: &mut Vec<String>,
                          rng: &mut ChaCha8Rng,
                          tier: MerchantTier,
                          rate: Vec<f64>,
                          exact: Option<Vec<u32>>| {
        for _ in 0..8 {
            let (name, t) = pick(tier, rng);
            if !used.contains(&name) {
                used.push(name.clone());
                plans.push(MerchantPlan { name, tier: t, weekly_rate: rate, exact_counts: exact });
                return;
            }
        }
    };

    // Stationary rates wobble week to week and may drift slowly across the
    // window. Short windows cannot tell a drifting negative from the onset
    // of a planted ramp; long windows can, which is what makes longer spans
    // genuinely more informative.
    let noisy = |rate: f64, slope: f64, weeks: usize, rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..weeks)
            .map(|w| {
                let drift = 1.0 + slope * (w as f64) / (weeks.max(1) as f64);
                let wobble = (rng.gen_range(-0.35..0.35f64)).exp();
                (rate * drift * wobble).max(0.0)
            })
            .collect()
    };
    let flat = |rate: f64, weeks: usize, rng: &mut ChaCha8Rng| -> Vec<f64> {
        let slope = rng.gen_range(-0.4..0.6);
        noisy(rate, slope, weeks, rng)
    };
    let mut truth = UserTruth {
        user_id: user_id.to_string(),
        label: u8::from(pattern.is_some()),
        pattern,
        surge_merchant: None,
        shift_merchant: None,
    };

    // Stationary backbone shared by every user.
    for _ in 0..rng.gen_range(2..=4) {
        let rate = rng.gen_range(0.8..2.5);
        let series = flat(rate, weeks, rng);
        add_unique(&mut plans, &mut used, rng, Basic, series, None);
    }
    for _ in 0..rng.gen_range(1..=2) {
        let rate = rng.gen_range(1.5..4.0);
        let series = flat(rate, weeks, rng);
        add_unique(&mut plans, &mut used, rng, Transport, series, None);
    }

    match pattern {
        None => {
            // Confuser negatives: stable presence at the very tiers the
            // positive patterns use, so trajectory — not presence — is what
            // separates the classes.
            if rng.gen_bool(0.35) {
                let rate = rng.gen_range(0.3..2.0);
                let series = flat(rate, weeks, rng);
                add_unique(&mut plans, &mut used, rng, Finance, series, None);
            }
            if rng.gen_bool(0.50) {
                // Some of these drift clearly upward, which at short spans is
                // hard to tell from the onset of an impulsive surge.
                let rate = rng.gen_range(2.5..8.0);
                let slope = rng.gen_range(0.0..1.2);
                let series = noisy(rate, slope, weeks, rng);
                add_unique(&mut plans, &mut used, rng, Entertainment, series, None);
            }
            if rng.gen_bool(0.40) {
                // Transient binge: rises like a surge, then falls back. The
                // recovery is only visible when the window is long enough to
                // contain it.
                let base = rng.gen_range(0.5..2.0);
                let peak = rng.gen_range(6.0..10.0);
                let rise_w = rng.gen_range(4..=7usize).min(weeks);
                let fall_w = rng.gen_range(3..=5usize);
                let start = rng.gen_range(0..weeks.saturating_sub(2).max(1));
                let mut series = noisy(base, 0.0, weeks, rng);
                for w in start..weeks {
                    let k = w - start;
                    if k < rise_w {
                        series[w] = base + (peak - base) * ((k + 1) as f64 / rise_w as f64);
                    } else if k < rise_w + fall_w {
                        let back = (k - rise_w + 1) as f64 / (fall_w + 1) as f64;
                        series[w] = peak - (peak - base) * back;
                    }
                }
                add_unique(&mut plans, &mut used, rng, Entertainment, series, None);
            }
            if rng.gen_bool(0.35) {
                let mut series = flat(rng.gen_range(0.8..2.5), weeks, rng);
                if rng.gen_bool(0.4) {
                    // Belt-tightening dip with a later recovery.
                    let dip_len = rng.gen_range(2..=4usize).min(weeks);
                    let start = rng.gen_range(0..weeks.saturating_sub(1).max(1));
                    for w in start..(start + dip_len).min(weeks) {
                        series[w] *= 0.2;
                    }
                }
                add_unique(&mut plans, &mut used, rng, Luxury, series, None);
            }
        }
        Some(PlantedPattern::LifestyleShift) => {
            let changepoint = (weeks as f64 * rng.gen_range(0.35..0.65)) as usize;
            // Luxury spending present early, declining after the changepoint.
            let lux_rate = rng.gen_range(1.2..2.5);
            let floor = rng.gen_range(0.1..0.5);
            let mut lux = noisy(lux_rate, 0.0, weeks, rng);
            for w in changepoint..weeks {
                lux[w] *= floor;
            }
            let (lux_name, _) = pick(Luxury, rng);
            used.push(lux_name.clone());
            truth.shift_merchant = Some(lux_name.clone());
            plans.push(MerchantPlan {
                name: lux_name,
                tier: Luxury,
                weekly_rate: lux,
                exact_counts: None,
            });
            // Consumer finance appears at the changepoint and ramps up.
            let fin_peak = rng.gen_range(0.8..3.0);
            let mut fin = vec![0.0; weeks];
            for w in changepoint..weeks {
                let progress = (w - changepoint + 1) as f64 / (weeks - changepoint) as f64;
                fin[w] = fin_peak * progress;
            }
            add_unique(&mut plans, &mut used, rng, Finance, fin, None);
            // Basic consumption rises after the shift.
            let rise = rng.gen_range(1.2..2.0);
            for plan in plans.iter_mut().filter(|p| p.tier == Basic) {
                for w in changepoint..weeks {
                    plan.weekly_rate[w] *= rise;
                }
            }
        }
        Some(PlantedPattern::ImpulsiveSurge) => {
            // Super-linear ramp at one entertainment merchant. The first ramp
            // week holds exactly one transaction pinned to the week start so
            // weekly bins anchored at the first surge transaction reproduce
            // the planned counts exactly.
            let peak = cfg.surge_peak_per_week + rng.gen_range(0..2);
            let ramp_weeks = (weeks as f64 * 0.65).round().max(4.0) as usize;
            let ramp_weeks = ramp_weeks.min(weeks);
            let mut counts = Vec::with_capacity(ramp_weeks);
            for w in 0..ramp_weeks {
                let progress = (w + 1) as f64 / ramp_weeks as f64;
                counts.push(((peak as f64) * progress * progress).round().max(1.0) as u32);
            }
            counts[ramp_weeks - 1] = peak;
            let mut exact = vec![0u32; weeks];
            exact[weeks - ramp_weeks..].copy_from_slice(&counts);
            let (name, _) = pick(Entertainment, rng);
            used.push(name.clone());
            truth.surge_merchant = Some(name.clone());
            plans.push(MerchantPlan {
                name,
                tier: Entertainment,
                weekly_rate: vec![0.0; weeks],
                exact_counts: Some(exact),
            });
            if rng.gen_bool(0.7) {
                let rate = rng.gen_range(1.0..4.0);
                let series = flat(rate, weeks, rng);
                add_unique(&mut plans, &mut used, rng, Entertainment, series, None);
            }
        }
    }

    // Scale stationary rates toward the configured daily mean.
    let implied: f64 = plans
        .iter()
        .filter(|p| p.exact_counts.is_none())
        .map(|p| p.weekly_rate.iter().sum::<f64>() / weeks as f64)
        .sum::<f64>()
        / 7.0;
    if implied > 0.0 {
        let factor = cfg.mean_behaviors_per_day / implied;
        for p in plans.iter_mut() {
            if p.exact_counts.is_none() {
                for r in p.weekly_rate.iter_mut() {
                    *r *= factor;
                }
            }
        }
    }

    let mut behaviors = Vec::new();
    for plan in &plans {
        for w in 0..weeks {
            let count = match &plan.exact_counts {
                Some(c) => c[w],
                None => {
                    let rate = plan.weekly_rate[w];
                    if rate <= 0.0 {
                        0
                    } else {
                        Poisson::new(rate).map(|d| d.sample(rng) as u32).unwrap_or(0)
                    }
                }
            };
            if count == 0 {
                continue;
            }
            let week_start = window_start + (w as i64) * WEEK;
            let pinned_first = plan.exact_counts.is_some() && plan.weekly_rate[w] == 0.0 && {
                // first non-zero ramp week
                let exact = plan.exact_counts.as_ref().unwrap();
                exact[..w].iter().all(|&c| c == 0)
            };
            for j in 0..count {
                let ts = if plan.exact_counts.is_some() {
                    // Ramp transactions land uniformly within their week; the
                    // very first ramp transaction sits at the week start
                    // exactly, which anchors weekly bins to the planned
                    // counts.
                    if pinned_first && j == 0 {
                        week_start
                    } else {
                        week_start + rng.gen_range(0..WEEK)
                    }
                } else {
                    week_start + sample_moment(rng, plan.tier)
                };
                behaviors.push(PaymentBehavior {
                    merchant_name: plan.name.clone(),
                    description: sample_description(rng, plan.tier),
                    ts,
                    amount: sample_amount(rng, plan.tier),
                });
            }
        }
    }
    (behaviors, truth)
}

/// Second offset within a week with tier-typical day and hour rhythm.
fn sample_moment(rng: &mut ChaCha8Rng, tier: MerchantTier) -> i64 {
    use MerchantTier::*;
    // Weekends are busier for leisure tiers, weekdays for transport.
    let day: i64 = match tier {
        Transport => rng.gen_range(0..5),
        Luxury | Entertainment => {
            if rng.gen_bool(0.45) {
                5 + rng.gen_range(0..2)
            } else {
                rng.gen_range(0..5)
            }
        }
        _ => rng.gen_range(0..7),
    };
    let hour: i64 = match tier {
        Luxury => rng.gen_range(18..23),
        Basic => {
            if rng.gen_bool(0.4) {
                rng.gen_range(7..10)
            } else {
                rng.gen_range(10..21)
            }
        }
        Transport => {
            if rng.gen_bool(0.5) {
                rng.gen_range(7..10)
            } else {
                rng.gen_range(17..20)
            }
        }
        Entertainment => rng.gen_range(19..24),
        Finance => rng.gen_range(9..18),
    };
    day * DAY + hour * 3600 + rng.gen_range(0..3600)
}

fn sample_description(rng: &mut ChaCha8Rng, tier: MerchantTier) -> String {
    if rng.gen_bool(0.7) {
        GENERIC_DESCRIPTIONS[rng.gen_range(0..GENERIC_DESCRIPTIONS.len())].to_string()
    } else {
        let options = descriptions(tier);
        options[rng.gen_range(0..options.len())].to_string()
    }
}

fn sample_amount(rng: &mut ChaCha8Rng, tier: MerchantTier) -> f64 {
    use MerchantTier::*;
    let (mu, sigma) = match tier {
        Luxury => (400.0f64, 0.5),
        Basic => (25.0, 0.6),
        Transport => (3.0, 0.3),
        Entertainment => (30.0, 0.8),
        Finance => (150.0, 0.5),
    };
    let dist = LogNormal::new(mu.ln(), sigma).expect("valid lognormal");
    let raw: f64 = dist.sample(rng);
    (raw * 100.0).round() / 100.0
}
