//! Writes the bundled tutorial corpus and dictionaries to `data/tutorial`.
//!
//! ```text
//! cargo run -p polarscale --example tutorial_corpus -- data/tutorial
//! ```

use std::fs;
use std::path::PathBuf;

use polarscale::corpus::write_corpus;
use polarscale::synth::{generate, Lexicon, SyntheticConfig, Topic};

const BACKGROUND: &str = "the of and to a in is that for on with as was by at from it be this are have \
has not but they were which their been more said will about would there also after year new people time \
city country government report official last first two public between week state local program plan \
group area service market company project village region policy trade meeting visit day month center \
community school family children water road train bridge river farm farmers food price prices energy \
power coal oil gas factory workers worker industry technology science research data network system \
internet phone phones park forest mountain coast island port ship ships airport flight flights tourism \
tourists culture music film festival museum art history language book books newspaper media television \
radio story stories photo photos event events weather rain snow wind temperature summer autumn spring \
morning evening night street streets house houses building buildings land price cost costs budget tax \
taxes bank banks money loan loans investment investors export exports import imports growth economy \
economic industrial rural urban province provinces county counties district districts minister ministers \
leader leaders president council committee law laws court courts police security army navy border \
relations cooperation agreement agreements talks summit partner partners friendship exchange exchanges \
students teachers university universities college campus class classes lesson lessons library \
computer computers software robot robots car cars bus buses bicycle road roads railway station stations \
highway highways shop shops store stores restaurant restaurants hotel hotels garden gardens tree trees \
flower flowers animal animals bird birds fish horse horses panda pandas dog dogs cat cats sea lake \
lakes valley hill hills desert grassland wetland morning afternoon weekend holiday holidays travel \
journey visitors guests residents citizens neighbors volunteers staff member members chairman director \
manager managers engineer engineers designer designers reporter reporters writer writers \
artist singer dancer chef farmer driver pilot sailor soldier officer officers expert experts scholar scholars \
announced according including during while because however although through under over around since \
before among against toward across along behind near inside outside";

const HEALTH: &[(&str, &[&str])] = &[
    ("health", &["health", "healthy", "healthier"]),
    ("hospital", &["hospital", "hospitals", "hospitalized"]),
    ("doctor", &["doctor", "doctors"]),
    ("nurse", &["nurse", "nurses", "nursing"]),
    ("patient", &["patient", "patients"]),
    ("disease", &["disease", "diseases"]),
    ("medic", &["medical", "medicine", "medicines", "medication"]),
    ("virus", &["virus", "viruses"]),
    ("vaccin", &["vaccine", "vaccines", "vaccination"]),
    ("infect", &["infection", "infections", "infected"]),
    ("symptom", &["symptom", "symptoms"]),
    ("clinic", &["clinic", "clinics", "clinical"]),
    ("surger", &["surgery", "surgeries"]),
    ("epidemic", &["epidemic", "epidemics"]),
    ("pain", &["pain", "painful"]),
    ("fever", &["fever", "fevers"]),
    ("cancer", &["cancer", "cancers"]),
    ("diagnos", &["diagnosis", "diagnosed"]),
];

const HEALTH_ASSOCIATED: &str = "treatment care cases bed beds ward wards blood test tests testing mask masks \
quarantine recovery recovered outbreak prevention drug drugs dose doses pharmacy emergency ambulance \
physician wellness body mental sleep diet exercise fitness elderly insurance";

const ACHIEVEMENT: &[(&str, &[&str])] = &[
    ("achiev", &["achieve", "achieved", "achievement", "achievements"]),
    ("accomplish", &["accomplish", "accomplished", "accomplishment"]),
    ("success", &["success", "successful", "successfully"]),
    ("award", &["award", "awards", "awarded"]),
    ("prize", &["prize", "prizes"]),
    ("champion", &["champion", "champions", "championship"]),
    ("victor", &["victory", "victories", "victorious"]),
    ("triumph", &["triumph", "triumphant"]),
    ("excel", &["excellent", "excellence", "excelled"]),
    ("medal", &["medal", "medals", "medalist"]),
    ("record", &["record", "records", "recorded"]),
    ("breakthrough", &["breakthrough", "breakthroughs"]),
    ("milestone", &["milestone", "milestones"]),
    ("honor", &["honor", "honored", "honors"]),
];

const ACHIEVEMENT_ASSOCIATED: &str = "goal goals effort efforts team teams competition contest final finals \
trophy ceremony celebrate celebrated celebration proud pride talent talented ambition best top winner \
winners gold silver score scored performance";

fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

fn topic(name: &str, stems: &[(&str, &[&str])], associated: &str) -> Topic {
    Topic {
        name: name.to_string(),
        stems: stems
            .iter()
            .map(|(s, forms)| (s.to_string(), forms.iter().map(|f| f.to_string()).collect()))
            .collect(),
        associated: words(associated),
    }
}

fn main() {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "data/tutorial".into()));
    let mut seen = std::collections::HashSet::new();
    let background: Vec<String> = words(BACKGROUND).into_iter().filter(|w| seen.insert(w.clone())).collect();
    let lexicon = Lexicon {
        background,
        topics: vec![
            topic("health", HEALTH, HEALTH_ASSOCIATED),
            topic("achievement", ACHIEVEMENT, ACHIEVEMENT_ASSOCIATED),
        ],
        groups: vec![
            ("china".into(), words("China Chinese Beijing")),
            ("usa".into(), words("America American Washington")),
        ],
    };
    let others: Vec<&String> = lexicon
        .background
        .iter()
        .chain(lexicon.topics.iter().flat_map(|t| &t.associated))
        .collect();
    for t in &lexicon.topics {
        for (stem, _) in &t.stems {
            if let Some(w) = others.iter().find(|w| w.starts_with(stem.as_str())) {
                panic!("pattern {stem}* would match non-dictionary word {w:?}");
            }
        }
    }

    let config = SyntheticConfig {
        n_docs: 600,
        days: 731,
        ..SyntheticConfig::default()
    };
    let docs = generate(&lexicon, &config);
    fs::create_dir_all(&dir).expect("create output directory");
    write_corpus(dir.join("corpus.jsonl"), &docs).expect("write corpus");
    for t in &lexicon.topics {
        let mut text = format!("# {} dictionary\n", t.name);
        for p in t.dictionary().patterns() {
            text.push_str(p);
            text.push('\n');
        }
        fs::write(dir.join(format!("{}.txt", t.name)), text).expect("write dictionary");
    }
    println!("wrote {} documents to {}", docs.len(), dir.display());
}
