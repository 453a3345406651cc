use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::boost::BoostParams;
use crate::error::{Error, Result};

/// One evaluated grid cell; exactly one of `val_mse` / `error` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell<P> {
    pub params: P,
    pub val_mse: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridOutcome<P> {
    pub best_index: usize,
    pub best: P,
    pub cells: Vec<GridCell<P>>,
}

/// Fits every cell (in parallel), scores each fitted model by validation MSE
/// and returns the argmin with the full table. Ties go to the earliest cell
/// in declared order; failed cells are kept in the table with their error.
pub fn grid_search<P, M, F, S>(grid: &[P], fit: F, score: S) -> Result<(GridOutcome<P>, M)>
where
    P: Clone + Send + Sync,
    M: Send,
    F: Fn(&P) -> Result<M> + Sync,
    S: Fn(&M) -> Result<f64> + Sync,
{
    if grid.is_empty() {
        return Err(Error::InvalidConfig("parameter grid is empty".into()));
    }
    let results: Vec<Result<(M, f64)>> = grid
        .par_iter()
        .map(|p| {
            let model = fit(p)?;
            let mse = score(&model)?;
            if mse.is_finite() {
                Ok((model, mse))
            } else {
                Err(Error::Singular("non-finite validation MSE".into()))
            }
        })
        .collect();

    let mut cells = Vec::with_capacity(grid.len());
    let mut best: Option<(usize, f64, M)> = None;
    for (i, (p, r)) in grid.iter().zip(results).enumerate() {
        match r {
            Ok((model, mse)) => {
                cells.push(GridCell {
                    params: p.clone(),
                    val_mse: Some(mse),
                    error: None,
                });
                if best.as_ref().map_or(true, |(_, b, _)| mse < *b) {
                    best = Some((i, mse, model));
                }
            }
            Err(e) => cells.push(GridCell {
                params: p.clone(),
                val_mse: None,
                error: Some(e.to_string()),
            }),
        }
    }
    let (best_index, _, model) =
        best.ok_or_else(|| Error::InvalidConfig("every grid cell failed to fit".into()))?;
    Ok((
        GridOutcome {
            best_index,
            best: grid[best_index].clone(),
            cells,
        },
        model,
    ))
}

/// Cartesian grid over boosting hyperparameters. Cells are enumerated with
/// the last listed axis varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoostGrid {
    pub learning_rate: Vec<f64>,
    pub max_depth: Vec<usize>,
    pub l2_leaf_lambda: Vec<f64>,
    pub n_rounds: Vec<usize>,
}

impl Default for BoostGrid {
    fn default() -> Self {
        BoostGrid {
            learning_rate: vec![0.05, 0.1, 0.3],
            max_depth: vec![2, 3, 4],
            l2_leaf_lambda: vec![0.0, 1.0, 10.0],
            n_rounds: vec![200],
        }
    }
}

impl BoostGrid {
    pub fn cells(&self, base: &BoostParams) -> Vec<BoostParams> {
        let mut out = Vec::new();
        for &learning_rate in &self.learning_rate {
            for &depth in &self.max_depth {
                for &l2 in &self.l2_leaf_lambda {
                    for &n_rounds in &self.n_rounds {
                        out.push(BoostParams {
                            learning_rate,
                            max_depth: Some(depth),
                            l2_leaf_lambda: l2,
                            n_rounds,
                            ..*base
                        });
                    }
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singleton_grid_returns_its_cell() {
        let (out, model) = grid_search(&[3.0], |p| Ok(*p * 2.0), |m| Ok(*m)).unwrap();
        assert_eq!(out.best_index, 0);
        assert_eq!(out.best, 3.0);
        assert_eq!(model, 6.0);
    }

    #[test]
    fn ties_go_to_the_first_cell() {
        let grid = [1.0, 2.0, -2.0, 0.5];
        let (out, _) = grid_search(&grid, |p| Ok(*p), |m| Ok(m * m)).unwrap();
        // 2.0 and -2.0 tie on score but 0.5 is lower; then check pure tie.
        assert_eq!(out.best, 0.5);
        let (out, _) = grid_search(&[2.0, -2.0], |p| Ok(*p), |m| Ok(m * m)).unwrap();
        assert_eq!(out.best_index, 0);
    }

    #[test]
    fn failed_cells_are_recorded() {
        let grid = [1, 2, 3];
        let (out, _) = grid_search(
            &grid,
            |p| if *p == 2 { Err(Error::Singular("boom".into())) } else { Ok(*p) },
            |m| Ok(*m as f64),
        )
        .unwrap();
        assert_eq!(out.cells.len(), 3);
        assert!(out.cells[1].error.as_deref().unwrap().contains("boom"));
        assert!(out.cells[1].val_mse.is_none());
        assert_eq!(out.best, 1);
    }

    #[test]
    fn all_failed_is_an_error() {
        let r = grid_search(&[1], |_| Err::<i32, _>(Error::Singular("x".into())), |_| Ok(0.0));
        assert!(r.is_err());
    }

    #[test]
    fn boost_grid_order() {
        let g = BoostGrid {
            learning_rate: vec![0.1, 0.2],
            max_depth: vec![1, 2],
            l2_leaf_lambda: vec![0.0],
            n_rounds: vec![10],
        };
        let cells = g.cells(&BoostParams::default());
        let order: Vec<(f64, Option<usize>)> = cells.iter().map(|c| (c.learning_rate, c.max_depth)).collect();
        assert_eq!(order, vec![(0.1, Some(1)), (0.1, Some(2)), (0.2, Some(1)), (0.2, Some(2))]);
    }
}
