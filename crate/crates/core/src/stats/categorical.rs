use crate::error::{Error, Result};
use crate::stats::special::sf_chi2;
use crate::stats::{TestMethod, TestResult};

/// Pearson chi-square test of independence on an r × c table of counts.
pub fn chi_square_independence(table: &[Vec<u64>]) -> Result<TestResult> {
    let r = table.len();
    let c = table.first().map_or(0, Vec::len);
    if r < 2 || c < 2 {
        return Err(Error::InsufficientData(format!(
            "contingency table is {r}x{c}, need at least 2x2"
        )));
    }
    if table.iter().any(|row| row.len() != c) {
        return Err(Error::invalid("ragged contingency table"));
    }
    let row_sums: Vec<f64> = table
        .iter()
        .map(|row| row.iter().sum::<u64>() as f64)
        .collect();
    let col_sums: Vec<f64> = (0..c)
        .map(|j| table.iter().map(|row| row[j]).sum::<u64>() as f64)
        .collect();
    if let Some(i) = row_sums.iter().position(|&s| s == 0.0) {
        return Err(Error::InsufficientData(format!(
            "row {i} has a zero marginal"
        )));
    }
    if let Some(j) = col_sums.iter().position(|&s| s == 0.0) {
        return Err(Error::InsufficientData(format!(
            "column {j} has a zero marginal"
        )));
    }
    let total: f64 = row_sums.iter().sum();
    let mut stat = 0.0;
    let mut sparse = 0;
    for (i, row) in table.iter().enumerate() {
        for (j, &obs) in row.iter().enumerate() {
            let e = row_sums[i] * col_sums[j] / total;
            if e < 5.0 {
                sparse += 1;
            }
            let d = obs as f64 - e;
            stat += d * d / e;
        }
    }
    let df = ((r - 1) * (c - 1)) as f64;
    let mut result = TestResult::new(TestMethod::ChiSquare, stat, vec![df], sf_chi2(stat, df)?);
    if sparse > 0 {
        result
            .notes
            .push(format!("{sparse} cells with expected count < 5"));
    }
    Ok(result)
}

/// min(1, m·p) for each of the m p-values.
pub fn bonferroni(pvals: &[f64]) -> Vec<f64> {
    let m = pvals.len() as f64;
    pvals.iter().map(|p| (p * m).min(1.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::special::erfc;

    #[test]
    fn independent_table() {
        let r = chi_square_independence(&[vec![10, 10], vec![10, 10]]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn hand_case() {
        let r = chi_square_independence(&[vec![20, 10], vec![10, 20]]).unwrap();
        assert!((r.statistic - 100.0 / 15.0).abs() < 1e-12);
        // df = 1 tail: erfc(sqrt(x/2))
        let oracle = erfc((r.statistic / 2.0).sqrt());
        assert!((r.p_value - oracle).abs() < 1e-12);
        assert!((r.p_value - 0.00982).abs() < 1e-4);
        assert_eq!(r.df, vec![1.0]);
        assert!(r.notes.is_empty());
    }

    #[test]
    fn zero_marginal_and_shape_errors() {
        assert!(chi_square_independence(&[vec![0, 0], vec![1, 2]]).is_err());
        assert!(chi_square_independence(&[vec![1, 2]]).is_err());
        assert!(chi_square_independence(&[vec![1, 2], vec![3]]).is_err());
    }

    #[test]
    fn sparse_cells_flagged() {
        let r = chi_square_independence(&[vec![1, 9], vec![8, 2]]).unwrap();
        assert_eq!(r.notes, vec!["2 cells with expected count < 5".to_string()]);
    }

    #[test]
    fn bonferroni_rule() {
        let adj = bonferroni(&[0.01, 0.04, 0.5]);
        let expect = [0.03, 0.12, 1.0];
        for (a, e) in adj.iter().zip(expect) {
            assert!((a - e).abs() < 1e-15);
        }
        assert_eq!(bonferroni(&[0.2]), vec![0.2]);
        assert!(bonferroni(&[]).is_empty());
    }
}
