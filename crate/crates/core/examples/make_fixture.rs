//! Regenerates the bundled 500-title fixture under `tests/fixtures/titles500`.
//!
//! Titles mix English and Chinese across six finance themes. Embeddings are
//! bag-of-words counts over the fixture tokenizer's terms, pushed through a
//! seeded Gaussian random projection to 64 dimensions and unit-normalized.
//!
//! Run with `cargo run -p finkit-core --example make_fixture`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use finkit_core::io::{write_corpus, write_embeddings, Document, EmbeddingMatrix};
use finkit_core::pipeline::TokenizerSpec;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const TITLES: usize = 500;
const DIM: usize = 64;
const SEED: u64 = 20240501;

struct Theme {
    en: &'static [&'static str],
    en_entities: &'static [&'static str],
    zh: &'static [&'static str],
}

const THEMES: [Theme; 6] = [
    Theme {
        en: &["rate", "hike", "cut", "policy", "inflation", "yields", "tightening", "easing", "fed"],
        en_entities: &["central bank", "interest rate", "federal reserve"],
        zh: &["利率", "央行", "加息", "降息", "通胀", "货币政策", "降准"],
    },
    Theme {
        en: &["shares", "stocks", "rally", "index", "earnings", "dividend", "buyback", "equity"],
        en_entities: &["stock market", "nasdaq composite", "s&p 500"],
        zh: &["股市", "股票", "指数", "上涨", "分红", "回购", "沪深300"],
    },
    Theme {
        en: &["bond", "treasury", "coupon", "default", "spread", "issuance", "maturity", "credit"],
        en_entities: &["bond market", "credit rating", "treasury yield"],
        zh: &["债券", "国债", "违约", "信用", "发行", "利差", "评级"],
    },
    Theme {
        en: &["bitcoin", "crypto", "token", "blockchain", "exchange", "wallet", "mining", "stablecoin"],
        en_entities: &["digital currency", "crypto exchange"],
        zh: &["比特币", "加密货币", "区块链", "数字货币", "挖矿", "钱包"],
    },
    Theme {
        en: &["housing", "mortgage", "property", "developer", "home", "sales", "rent", "land"],
        en_entities: &["real estate", "home prices", "mortgage rate"],
        zh: &["房地产", "房价", "楼市", "开发商", "房贷", "土地"],
    },
    Theme {
        en: &["oil", "crude", "gold", "commodity", "futures", "copper", "opec", "supply"],
        en_entities: &["crude oil", "gold price"],
        zh: &["原油", "黄金", "期货", "大宗商品", "铜价", "油价"],
    },
];

const EN_FILLER: &[&str] = &["the", "of", "in", "on", "as", "to", "after", "amid", "new", "says", "report", "week"];
const ZH_FILLER: &[&str] = &["的", "在", "将", "今年", "市场", "继续", "报告"];
const STOPWORDS: &[&str] = &["the", "of", "in", "on", "as", "to", "after", "amid", "的", "在", "将"];

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn english_title(rng: &mut ChaCha8Rng, themes: &[&Theme]) -> String {
    let mut words: Vec<String> = Vec::new();
    for _ in 0..rng.random_range(3..=5) {
        let t = themes.choose(rng).unwrap();
        words.push(t.en.choose(rng).unwrap().to_string());
    }
    if rng.random_bool(0.6) {
        let t = themes.choose(rng).unwrap();
        words.insert(rng.random_range(0..=words.len()), t.en_entities.choose(rng).unwrap().to_string());
    }
    for _ in 0..rng.random_range(1..=2) {
        words.insert(rng.random_range(1..=words.len()), EN_FILLER.choose(rng).unwrap().to_string());
    }
    let mut title = capitalize(&words.join(" "));
    if rng.random_bool(0.3) {
        title.push_str(&format!(", {}%", rng.random_range(1..20)));
    }
    title
}

fn chinese_title(rng: &mut ChaCha8Rng, themes: &[&Theme]) -> String {
    let mut parts: Vec<&str> = Vec::new();
    for _ in 0..rng.random_range(3..=5) {
        let t = themes.choose(rng).unwrap();
        parts.push(t.zh.choose(rng).unwrap());
    }
    parts.insert(rng.random_range(1..=parts.len()), ZH_FILLER.choose(rng).unwrap());
    let mut title = parts.concat();
    if rng.random_bool(0.3) {
        title.push('：');
        title.push_str(&capitalize(themes[0].en.choose(rng).unwrap()));
    }
    title
}

fn write_lines(path: &Path, lines: impl IntoIterator<Item = String>) {
    let mut text = String::new();
    for l in lines {
        text.push_str(&l);
        text.push('\n');
    }
    fs::write(path, text).unwrap();
}

fn main() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/titles500");
    fs::create_dir_all(&dir).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);

    let mut docs = Vec::with_capacity(TITLES);
    for i in 0..TITLES {
        let theme = i % THEMES.len();
        // one title in twenty blends two themes
        let mixed = rng.random_bool(0.05);
        let mut picked = vec![&THEMES[theme]];
        if mixed {
            picked.push(&THEMES[(theme + rng.random_range(1..THEMES.len())) % THEMES.len()]);
        }
        let text = if rng.random_bool(0.6) {
            english_title(&mut rng, &picked)
        } else {
            chinese_title(&mut rng, &picked)
        };
        docs.push(
            Document::new(format!("t{i:03}"), text)
                .with_meta("theme", theme.to_string())
                .with_meta("mixed", mixed.to_string()),
        );
    }
    write_corpus(&docs, dir.join("corpus.jsonl")).unwrap();

    let entities: BTreeSet<String> = THEMES
        .iter()
        .flat_map(|t| t.en_entities.iter().chain(t.zh))
        .map(|e| e.to_string())
        .collect();
    write_lines(&dir.join("dict.txt"), entities);

    let mut vocab = BTreeSet::new();
    for d in &docs {
        for c in d.text.chars().filter(|c| !c.is_whitespace()) {
            vocab.insert(c.to_string());
            vocab.insert(format!("##{c}"));
        }
    }
    for t in &THEMES {
        for w in t.en.iter().chain(EN_FILLER) {
            vocab.insert(w.to_string());
            vocab.insert(capitalize(w));
        }
    }
    write_lines(&dir.join("vocab.txt"), std::iter::once("[UNK]".to_string()).chain(vocab));
    write_lines(&dir.join("stopwords.txt"), STOPWORDS.iter().map(|s| s.to_string()));

    let spec = TokenizerSpec {
        dictionary: Some("dict.txt".into()),
        vocab: Some("vocab.txt".into()),
        stopwords: Some("stopwords.txt".into()),
        ..TokenizerSpec::default()
    };
    let tokenizer = spec.load(&dir).unwrap();
    let bags: Vec<BTreeMap<String, f32>> = docs
        .iter()
        .map(|d| {
            let mut bag = BTreeMap::new();
            for t in spec.terms(&tokenizer, &d.text) {
                *bag.entry(t).or_insert(0.0) += 1.0;
            }
            bag
        })
        .collect();
    let terms: BTreeSet<&String> = bags.iter().flat_map(|b| b.keys()).collect();
    let mut proj_rng = ChaCha8Rng::seed_from_u64(SEED + 1);
    let projection: BTreeMap<&String, Vec<f32>> = terms
        .into_iter()
        .map(|t| (t, (0..DIM).map(|_| StandardNormal.sample(&mut proj_rng)).collect()))
        .collect();
    let rows: Vec<Vec<f32>> = bags
        .iter()
        .map(|bag| {
            let mut v = vec![0f32; DIM];
            for (t, c) in bag {
                for (s, p) in v.iter_mut().zip(&projection[t]) {
                    *s += c * p;
                }
            }
            let n = v.iter().map(|x| x * x).sum::<f32>().sqrt().max(f32::MIN_POSITIVE);
            v.iter_mut().for_each(|x| *x /= n);
            v
        })
        .collect();
    let ids = docs.iter().map(|d| d.id.clone()).collect();
    let m = EmbeddingMatrix::from_rows(ids, &rows).unwrap();
    write_embeddings(&m, dir.join("embeddings.fkem")).unwrap();

    fs::write(
        dir.join("pipeline.toml"),
        "embeddings = \"embeddings.fkem\"\n\
         corpus = \"corpus.jsonl\"\n\
         output = \"out\"\n\
         \n\
         [tokenizer]\n\
         dictionary = \"dict.txt\"\n\
         vocab = \"vocab.txt\"\n\
         stopwords = \"stopwords.txt\"\n\
         \n\
         [hdbscan]\n\
         min_cluster_size = 10\n\
         min_samples = 5\n",
    )
    .unwrap();
    println!("wrote {} titles to {}", docs.len(), dir.display());
}
