//! Builds the shipped word-vector file from a hand-written lexicon of
//! synonym clusters. Deterministic for a given lexicon and seed.
//!
//! cargo run -p msrbot-core --example gen_vectors -- data/nlu/lexicon.json data/nlu/vectors.txt

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufReader, BufWriter};

use msrbot_core::WordVectorTable;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

#[derive(Deserialize)]
struct Lexicon {
    dimension: usize,
    seed: u64,
    noise: f64,
    stop_weight: f64,
    placeholder_weight: f64,
    placeholders: Vec<String>,
    clusters: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    cluster_weights: BTreeMap<String, f64>,
    unrelated: Vec<String>,
    stop_words: Vec<String>,
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / norm).collect()
}

fn axpy(acc: &mut [f64], a: f64, x: &[f64]) {
    for (y, x) in acc.iter_mut().zip(x) {
        *y += a * x;
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let [lexicon_path, out_path] = args.as_slice() else {
        return Err("usage: gen_vectors <lexicon.json> <vectors.txt>".into());
    };
    let lex: Lexicon = serde_json::from_reader(BufReader::new(File::open(lexicon_path)?))?;
    let dim = lex.dimension;
    let mut rng = ChaCha8Rng::seed_from_u64(lex.seed);

    // word -> weighted cluster directions
    let mut words: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (name, members) in &lex.clusters {
        let basis = random_unit(&mut rng, dim);
        let weight = lex.cluster_weights.get(name).copied().unwrap_or(1.0);
        for w in members {
            axpy(words.entry(w.clone()).or_insert_with(|| vec![0.0; dim]), weight, &basis);
        }
    }
    for p in &lex.placeholders {
        let basis = random_unit(&mut rng, dim);
        axpy(words.entry(p.clone()).or_insert_with(|| vec![0.0; dim]), lex.placeholder_weight, &basis);
    }
    for w in &lex.unrelated {
        let basis = random_unit(&mut rng, dim);
        axpy(words.entry(w.clone()).or_insert_with(|| vec![0.0; dim]), 1.0, &basis);
    }

    let stop: BTreeSet<&String> = lex.stop_words.iter().collect();
    let mut table = WordVectorTable::new(dim);
    for (word, mut v) in words {
        let noise = random_unit(&mut rng, dim);
        axpy(&mut v, lex.noise, &noise);
        table.insert(&word, v)?;
    }
    for word in stop {
        if table.get(word).is_some() {
            return Err(format!("{word} is both a stop word and a content word").into());
        }
        table.insert(word, random_unit(&mut rng, dim).iter().map(|x| x * lex.stop_weight).collect())?;
    }
    table.write(BufWriter::new(File::create(out_path)?))?;
    println!("wrote {} vectors of dimension {dim} to {out_path}", table.len());
    Ok(())
}
