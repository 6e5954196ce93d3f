use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::MetricError;
use crate::types::SystemKind;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankingBallot {
    pub annotator_id: String,
    pub segment_id: String,
    pub model_id: String,
    /// Best first.
    pub ordering: Vec<SystemKind>,
}

impl RankingBallot {
    pub fn validate(&self) -> Result<(), MetricError> {
        let mut seen = self.ordering.clone();
        seen.sort();
        seen.dedup();
        if self.ordering.len() != SystemKind::ALL.len() || seen.len() != SystemKind::ALL.len() {
            return Err(MetricError::InvalidBallot(format!(
                "ordering {:?} from `{}` on `{}` is not a permutation of the three systems",
                self.ordering, self.annotator_id, self.segment_id
            )));
        }
        Ok(())
    }

    fn position(&self, system: SystemKind) -> usize {
        self.ordering
            .iter()
            .position(|s| *s == system)
            .expect("validated ballot contains every system")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BordaResult {
    pub ballots: usize,
    pub points: BTreeMap<SystemKind, u64>,
    /// `wins[a][b]`: ballots ranking `a` above `b`.
    pub wins: BTreeMap<SystemKind, BTreeMap<SystemKind, u64>>,
}

impl BordaResult {
    /// Fraction of ballots ranking `a` above `b`.
    pub fn win_rate(&self, a: SystemKind, b: SystemKind) -> f64 {
        if self.ballots == 0 {
            return 0.0;
        }
        self.wins[&a][&b] as f64 / self.ballots as f64
    }

    pub fn total_points(&self) -> u64 {
        self.points.values().sum()
    }

    /// Systems by descending points.
    pub fn standings(&self) -> Vec<(SystemKind, u64)> {
        let mut out: Vec<_> = self.points.iter().map(|(s, p)| (*s, *p)).collect();
        out.sort_by(|x, y| y.1.cmp(&x.1).then(x.0.cmp(&y.0)));
        out
    }
}

/// Borda count with 2/1/0 points for first/second/third place.
pub fn borda(ballots: &[RankingBallot]) -> Result<BordaResult, MetricError> {
    if ballots.is_empty() {
        return Err(MetricError::InvalidBallot("no ballots".to_string()));
    }
    let mut points: BTreeMap<SystemKind, u64> = SystemKind::ALL.iter().map(|s| (*s, 0)).collect();
    let mut wins: BTreeMap<SystemKind, BTreeMap<SystemKind, u64>> = SystemKind::ALL
        .iter()
        .map(|a| {
            let row = SystemKind::ALL.iter().filter(|b| *b != a).map(|b| (*b, 0)).collect();
            (*a, row)
        })
        .collect();
    let top = SystemKind::ALL.len() as u64 - 1;
    for ballot in ballots {
        ballot.validate()?;
        for (rank, system) in ballot.ordering.iter().enumerate() {
            *points.get_mut(system).expect("known system") += top - rank as u64;
        }
        for a in SystemKind::ALL {
            for b in SystemKind::ALL {
                if a != b && ballot.position(a) < ballot.position(b) {
                    *wins.get_mut(&a).and_then(|row| row.get_mut(&b)).expect("pair") += 1;
                }
            }
        }
    }
    Ok(BordaResult {
        ballots: ballots.len(),
        points,
        wins,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use SystemKind::{Maats as M, SingleAgent as S, ZeroShot as Z};

    fn ballot(ordering: [SystemKind; 3]) -> RankingBallot {
        RankingBallot {
            annotator_id: "a".into(),
            segment_id: "1".into(),
            model_id: "m".into(),
            ordering: ordering.to_vec(),
        }
    }

    #[test]
    fn single_ballot_points() {
        let r = borda(&[ballot([M, S, Z])]).unwrap();
        assert_eq!(r.points[&M], 2);
        assert_eq!(r.points[&S], 1);
        assert_eq!(r.points[&Z], 0);
    }

    #[test]
    fn unanimous_win_rate() {
        let r = borda(&[ballot([M, S, Z]), ballot([M, S, Z]), ballot([M, S, Z])]).unwrap();
        assert_eq!(r.win_rate(M, S), 1.0);
        assert_eq!(r.win_rate(S, M), 0.0);
    }

    #[test]
    fn invalid_ballots() {
        assert!(borda(&[]).is_err());
        assert!(borda(&[ballot([M, M, Z])]).is_err());
        let mut short = ballot([M, S, Z]);
        short.ordering.pop();
        assert!(borda(&[short]).is_err());
    }
}
