//! JSON and CSV serialization of the tool's reports.

use serde::Serialize;
use serde_json::{Map, Value};

use nucleitool_core::batch::Evaluation;
use nucleitool_core::folds::FoldSpec;
use nucleitool_core::metrics::CountTable;

use crate::class_names;

/// {"pq": {class: value|null}, "mpq_plus": v, "r2": {class: value}, "r2_mean": v}
pub fn evaluation_json(eval: &Evaluation) -> anyhow::Result<String> {
    let mut pq = Map::new();
    let mut r2 = Map::new();
    for (i, name) in class_names().iter().enumerate() {
        pq.insert(
            name.to_string(),
            match eval.pq_per_class[i] {
                Some(v) => Value::from(v),
                None => Value::Null,
            },
        );
        r2.insert(name.to_string(), Value::from(eval.r2_per_class[i]));
    }
    let mut root = Map::new();
    root.insert("pq".to_string(), Value::Object(pq));
    root.insert("mpq_plus".to_string(), Value::from(eval.mpq_plus));
    root.insert("r2".to_string(), Value::Object(r2));
    root.insert("r2_mean".to_string(), Value::from(eval.r2_mean));
    Ok(serde_json::to_string_pretty(&Value::Object(root))?)
}

#[derive(Serialize)]
struct FoldsOut<'a> {
    domains: &'a [String],
    folds: &'a [Vec<usize>],
}

pub fn folds_json(spec: &FoldSpec) -> anyhow::Result<String> {
    Ok(serde_json::to_string_pretty(&FoldsOut {
        domains: &spec.domains,
        folds: &spec.folds,
    })?)
}

#[derive(Serialize)]
struct LossOut {
    np_ce: f64,
    np_dice: f64,
    mse_hv: f64,
    mse_dg: f64,
    gmse_hv: f64,
    gmse_dg: f64,
    tp_wce: f64,
    tp_dice: f64,
    total: f64,
}

/// Terms in the fixed order used by the accumulator in `loss`.
pub fn loss_json(terms: &[f64; 9]) -> anyhow::Result<String> {
    Ok(serde_json::to_string_pretty(&LossOut {
        np_ce: terms[0],
        np_dice: terms[1],
        mse_hv: terms[2],
        mse_dg: terms[3],
        gmse_hv: terms[4],
        gmse_dg: terms[5],
        tp_wce: terms[6],
        tp_dice: terms[7],
        total: terms[8],
    })?)
}

/// CSV with header `image,<class names>`, `\n` line endings, no trailing
/// comma.
pub fn counts_csv(table: &CountTable) -> String {
    let mut out = String::from("image");
    for name in class_names() {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (i, row) in table.rows.iter().enumerate() {
        out.push_str(&i.to_string());
        for value in row {
            out.push(',');
            out.push_str(&value.to_string());
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_header_and_rows() {
        let table = CountTable {
            rows: vec![[0, 3, 0, 1, 0, 0], [2, 0, 0, 0, 0, 1]],
        };
        let csv = counts_csv(&table);
        assert_eq!(
            csv,
            "image,neutrophil,epithelial,lymphocyte,plasma,eosinophil,connective\n\
             0,0,3,0,1,0,0\n\
             1,2,0,0,0,0,1\n"
        );
    }

    #[test]
    fn loss_json_key_order() {
        let json = loss_json(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 36.0]).unwrap();
        let keys: Vec<&str> = json
            .lines()
            .filter_map(|l| l.trim().strip_prefix('"'))
            .filter_map(|l| l.split('"').next())
            .collect();
        assert_eq!(
            keys,
            [
                "np_ce", "np_dice", "mse_hv", "mse_dg", "gmse_hv", "gmse_dg", "tp_wce", "tp_dice",
                "total"
            ]
        );
    }
}
