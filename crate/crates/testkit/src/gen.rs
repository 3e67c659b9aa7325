use chrono::{Duration, NaiveDate, TimeZone, Utc};
use parlvote_core::aggregation::{AgeBucket, SortKey, VoteIndexQuery};
use parlvote_core::corpus::{Corpus, Debate, Gender, Mep, Outcome, PoliticalGroup, RollCall, Speech, VoteChoice, VoteRecord};
use parlvote_core::gateway::{ContextFingerprint, Label, ModelId, ParsedPrediction, ResolvedContext, TaskKind};
use parlvote_core::store::{PredictionRecord, SpeakerSnapshot};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

pub use rand_chacha::ChaCha8Rng;
pub use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

const COUNTRIES: [&str; 6] = ["DE", "FR", "IT", "PL", "SE", "ES"];
const TOPICS: [&str; 5] = ["environment", "migration", "economy", "agriculture", "digital"];
const TITLE_WORDS: [&str; 10] = [
    "Ecodesign", "asylum", "budget", "Digital", "market", "farm", "energy", "Rights", "trade", "labour",
];

fn date_between(rng: &mut impl Rng, from: NaiveDate, days: i64) -> NaiveDate {
    from + Duration::days(rng.random_range(0..days))
}

/// A structurally valid corpus with up to `max_meps` members and
/// `max_roll_calls` roll calls. Titles repeat often enough to exercise
/// tiebreaks.
pub fn random_corpus(rng: &mut impl Rng, max_meps: usize, max_roll_calls: usize) -> Corpus {
    build_corpus(rng, max_meps, 1..=max_roll_calls)
}

/// Like [`random_corpus`] with exactly `roll_calls` roll calls.
pub fn random_corpus_sized(rng: &mut impl Rng, max_meps: usize, roll_calls: usize) -> Corpus {
    build_corpus(rng, max_meps, roll_calls..=roll_calls)
}

fn build_corpus(rng: &mut impl Rng, max_meps: usize, roll_calls: std::ops::RangeInclusive<usize>) -> Corpus {
    let n_groups = rng.random_range(1..=6);
    let mut ordinals: Vec<u32> = (1..=9).collect();
    ordinals.shuffle(rng);
    let groups: Vec<PoliticalGroup> = (0..n_groups)
        .map(|i| PoliticalGroup {
            id: format!("G{i}"),
            name: format!("Group {}", (b'A' + i as u8) as char),
            lr_ordinal: ordinals[i],
        })
        .collect();

    let n_meps = rng.random_range(1..=max_meps);
    let meps: Vec<Mep> = (0..n_meps)
        .map(|i| Mep {
            id: format!("M{i:03}"),
            full_name: format!("Member {i}"),
            gender: if rng.random_bool(0.5) { Gender::Male } else { Gender::Female },
            birth_date: date_between(rng, NaiveDate::from_ymd_opt(1940, 1, 1).unwrap(), 60 * 365),
            country: COUNTRIES.choose(rng).unwrap().to_string(),
            group_id: groups.choose(rng).unwrap().id.clone(),
        })
        .collect();

    let n_rc = rng.random_range(roll_calls);
    let mut debates = Vec::new();
    let mut roll_calls = Vec::new();
    let mut speeches = Vec::new();
    for i in 0..n_rc {
        let date = date_between(rng, NaiveDate::from_ymd_opt(2019, 7, 1).unwrap(), 5 * 365);
        let title = format!(
            "{} {}",
            TITLE_WORDS.choose(rng).unwrap(),
            TITLE_WORDS.choose(rng).unwrap()
        );
        debates.push(Debate {
            id: format!("D{i:03}"),
            title,
            topic: TOPICS.choose(rng).unwrap().to_string(),
            date,
            report_id: format!("A9-{i:04}/2023"),
        });
        let mut voters: Vec<&Mep> = meps.iter().filter(|_| rng.random_bool(0.7)).collect();
        voters.shuffle(rng);
        let records = voters
            .iter()
            .map(|m| VoteRecord {
                mep_id: m.id.clone(),
                choice: *VoteChoice::ALL.choose(rng).unwrap(),
            })
            .collect();
        roll_calls.push(RollCall {
            id: format!("RC{i:03}"),
            debate_id: format!("D{i:03}"),
            date,
            outcome: if rng.random_bool(0.5) { Outcome::Adopted } else { Outcome::Rejected },
            records,
        });
        if let Some(m) = voters.first() {
            speeches.push(Speech {
                id: format!("S{i:03}"),
                debate_id: format!("D{i:03}"),
                mep_id: m.id.clone(),
                text: "A speech.".into(),
            });
        }
    }
    Corpus::from_parts(groups, meps, debates, speeches, roll_calls)
}

pub fn random_query(rng: &mut impl Rng) -> VoteIndexQuery {
    let text_query = match rng.random_range(0..4) {
        0 => None,
        1 => Some(String::new()),
        2 => Some(TITLE_WORDS.choose(rng).unwrap().to_uppercase()),
        _ => {
            let w = TOPICS.choose(rng).unwrap();
            let start = rng.random_range(0..w.len() - 2);
            Some(w[start..start + 2].to_string())
        }
    };
    VoteIndexQuery {
        text_query,
        year: rng.random_bool(0.3).then(|| rng.random_range(2019..=2024)),
        topic: rng.random_bool(0.3).then(|| TOPICS.choose(rng).unwrap().to_ascii_uppercase()),
        sort: *[SortKey::DateDesc, SortKey::DateAsc, SortKey::TitleAsc, SortKey::ParticipantsDesc]
            .choose(rng)
            .unwrap(),
        page: rng.random_range(0..4),
        page_size: rng.random_range(1..=40),
    }
}

/// `n` self-consistent prediction records over two models and both tasks.
pub fn random_records(rng: &mut impl Rng, n: usize) -> Vec<PredictionRecord> {
    let models = [ModelId::new("stub", "alpha"), ModelId::new("stub", "beta")];
    let buckets = [AgeBucket::Under40, AgeBucket::From40To54, AgeBucket::From55To64, AgeBucket::Over64];
    (0..n)
        .map(|i| {
            let task = if rng.random_bool(0.5) { TaskKind::VotePrediction } else { TaskKind::GenderPrediction };
            let labels = task.labels();
            let predicted = *labels.choose(rng).unwrap();
            let ground_truth = *labels.choose(rng).unwrap();
            let gender = match ground_truth {
                Label::Male => Gender::Male,
                Label::Female => Gender::Female,
                _ if rng.random_bool(0.5) => Gender::Male,
                _ => Gender::Female,
            };
            let group = rng.random_range(0..4u32);
            PredictionRecord {
                record_id: format!("p-{:08}", i + 1),
                task,
                speech_id: format!("S{:03}", rng.random_range(0..50)),
                mep_id: format!("M{:03}", rng.random_range(0..50)),
                roll_call_id: (task == TaskKind::VotePrediction).then(|| format!("RC{:03}", rng.random_range(0..20))),
                model: models.choose(rng).unwrap().clone(),
                context_fingerprint: ContextFingerprint::from(format!("v1:{:064x}", i)),
                context: ResolvedContext {
                    task,
                    speech_id: String::new(),
                    attributes: Default::default(),
                    overridden: Default::default(),
                },
                speaker: SpeakerSnapshot {
                    gender,
                    country: COUNTRIES.choose(rng).unwrap().to_string(),
                    group_id: format!("G{group}"),
                    group_name: format!("Group {group}"),
                    group_lr_ordinal: Some(group + 1),
                    age_bucket: *buckets.choose(rng).unwrap(),
                },
                parsed: ParsedPrediction {
                    label: predicted,
                    confidence: rng.random_range(1..=5),
                    reasoning: format!("reason {i}"),
                },
                ground_truth,
                correct: predicted == ground_truth,
                created_at: Utc.timestamp_opt(1_700_000_000 + rng.random_range(0..1_000_000), 0).unwrap(),
            }
        })
        .collect()
}

const FILLER: [&str; 16] = [
    "the", "speaker", "uses", "a", "tone", "indirect", "directive", "structure", "technicality", "personality",
    "non-assertive", "rights", "human", "economy", "policy", "women",
];
const SEPARATORS: [&str; 9] = [" ", " ", ", ", ". ", "; ", " - ", "--", " (", "\u{2019} "];

/// A reasoning trace mixing the given spellings with near-miss filler,
/// random casing and punctuation.
pub fn random_trace(rng: &mut impl Rng, spellings: &[String]) -> String {
    let n = rng.random_range(0..14);
    let mut out = String::new();
    for _ in 0..n {
        let word = if !spellings.is_empty() && rng.random_bool(0.35) {
            spellings.choose(rng).unwrap().clone()
        } else {
            FILLER.choose(rng).unwrap().to_string()
        };
        let word = match rng.random_range(0..4) {
            0 => word.to_uppercase(),
            1 => {
                let mut c = word.chars();
                c.next().map(|f| f.to_uppercase().chain(c).collect()).unwrap_or_default()
            }
            _ => word,
        };
        let word = if rng.random_bool(0.1) { word.replace('\'', "\u{2019}") } else { word };
        out.push_str(&word);
        out.push_str(SEPARATORS.choose(rng).unwrap());
    }
    out
}
