//! Domain-based five-fold splitting of the training set.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// The five cross-validation folds: one per source domain, ordered by
/// lexicographic domain name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldSpec {
    /// Domain names in lexicographic order; fold i holds domain i's images.
    pub domains: Vec<String>,
    /// Image indices per fold, ascending within each fold.
    pub folds: Vec<Vec<usize>>,
}

/// Group image indices by domain name. Requires exactly five distinct
/// domains; fold order is the lexicographic order of the names, so the
/// split does not depend on input ordering.
pub fn split_by_domain(domains: &[String]) -> Result<FoldSpec> {
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, name) in domains.iter().enumerate() {
        groups.entry(name.as_str()).or_default().push(i);
    }
    if groups.len() != 5 {
        return Err(Error::WrongDomainCount {
            found: groups.len(),
        });
    }
    let (names, folds): (Vec<_>, Vec<_>) = groups
        .into_iter()
        .map(|(name, idx)| (name.to_string(), idx))
        .unzip();
    Ok(FoldSpec {
        domains: names,
        folds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(list: &[&str]) -> Vec<String> {
        list.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn five_domains_two_images_each() {
        let domains = names(&[
            "CRAG",
            "CRAG",
            "GlaS",
            "GlaS",
            "PanNuke",
            "PanNuke",
            "CoNSeP",
            "CoNSeP",
            "DigestPath",
            "DigestPath",
        ]);
        let spec = split_by_domain(&domains).unwrap();
        assert_eq!(
            spec.domains,
            names(&["CRAG", "CoNSeP", "DigestPath", "GlaS", "PanNuke"])
        );
        assert_eq!(spec.folds.len(), 5);
        assert!(spec.folds.iter().all(|f| f.len() == 2));
        // Folds partition all indices.
        let mut all: Vec<usize> = spec.folds.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn wrong_domain_count_is_rejected() {
        let domains = names(&["A", "B", "C", "D"]);
        match split_by_domain(&domains) {
            Err(Error::WrongDomainCount { found: 4 }) => {}
            other => panic!("expected WrongDomainCount, got {other:?}"),
        }
    }

    #[test]
    fn input_order_does_not_matter() {
        let a = names(&["E", "D", "C", "B", "A", "A", "B", "C"]);
        let b = names(&["A", "A", "B", "B", "C", "C", "D", "E"]);
        let spec_a = split_by_domain(&a).unwrap();
        let spec_b = split_by_domain(&b).unwrap();
        assert_eq!(spec_a.domains, spec_b.domains);
        // Same fold sizes per domain even though indices differ.
        for (fa, fb) in spec_a.folds.iter().zip(spec_b.folds.iter()) {
            assert_eq!(fa.len(), fb.len());
        }
        // Shuffling identical multiset of names yields identical folds.
        let c = names(&["B", "A", "A", "C", "C", "B", "E", "D"]);
        let spec_c = split_by_domain(&c).unwrap();
        assert_eq!(
            spec_c.folds,
            vec![vec![1, 2], vec![0, 5], vec![3, 4], vec![7], vec![6]]
        );
    }
}
