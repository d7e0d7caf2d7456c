use std::collections::{BTreeMap, BTreeSet};

use rand::seq::{index::sample, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Corpus, UtteranceRecord};
use crate::{Error, Result};

/// An N-way K-shot episode over intents. `K = 0` is the zero-shot case with
/// an empty support set.
#[derive(Clone, Debug, PartialEq)]
pub struct FewShotTask {
    pub support: Vec<UtteranceRecord>,
    pub query: Vec<UtteranceRecord>,
    pub k: usize,
    pub classes: Vec<String>,
}

impl FewShotTask {
    pub fn n(&self) -> usize {
        self.classes.len()
    }

    pub fn is_zero_shot(&self) -> bool {
        self.k == 0
    }
}

/// Draws `k` support records for each of `n` intents; every other record of
/// those intents becomes the query set, in corpus order.
pub fn kshot_sample(corpus: &Corpus, k: usize, n: usize, seed: u64) -> Result<FewShotTask> {
    let mut by_class: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in corpus.records.iter().enumerate() {
        by_class.entry(r.intent.as_str()).or_default().push(i);
    }
    if n == 0 || by_class.len() < n {
        return Err(Error::Sampling(format!(
            "{n}-way task needs {n} intents, corpus has {}",
            by_class.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names: Vec<&str> = by_class.keys().copied().collect();
    let mut picked: Vec<usize> = sample(&mut rng, names.len(), n).into_vec();
    picked.sort_unstable();
    let classes: Vec<String> = picked.iter().map(|&i| names[i].to_string()).collect();

    let mut support_idx = BTreeSet::new();
    let mut support = Vec::with_capacity(k * n);
    for c in &classes {
        let mut idx = by_class[c.as_str()].clone();
        if idx.len() < k {
            return Err(Error::Sampling(format!(
                "intent {c:?} has {} examples, {k} needed",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        for &i in &idx[..k] {
            support_idx.insert(i);
            support.push(corpus.records[i].clone());
        }
    }
    let class_set: BTreeSet<&str> = classes.iter().map(String::as_str).collect();
    let query = corpus
        .records
        .iter()
        .enumerate()
        .filter(|(i, r)| !support_idx.contains(i) && class_set.contains(r.intent.as_str()))
        .map(|(_, r)| r.clone())
        .collect();
    Ok(FewShotTask {
        support,
        query,
        k,
        classes,
    })
}
