//! Ingest invariants over random panels and memberships.

mod common;

use chrono::NaiveDate;
use common::month_end;
use factorforge::ingest::{clean, load_membership, load_prices, merge_and_filter, write_membership, write_prices, MembershipRow, ObservationRow, Panel};
use proptest::prelude::*;

fn cell() -> impl Strategy<Value = f64> {
    prop_oneof![
        6 => -1.0f64..1.0,
        1 => Just(f64::NAN),
        1 => Just(f64::INFINITY),
        1 => Just(f64::NEG_INFINITY),
    ]
}

fn rows_strategy() -> impl Strategy<Value = Vec<ObservationRow>> {
    prop::collection::vec((0i64..4, 0usize..24, cell(), cell(), cell(), cell()), 0..120).prop_map(|v| {
        v.into_iter()
            .map(|(permno, m, prc, ret, vol, shrout)| ObservationRow {
                permno,
                date: month_end(m),
                prc,
                ret,
                vol,
                shrout,
            })
            .collect()
    })
}

fn membership_strategy() -> impl Strategy<Value = Vec<MembershipRow>> {
    prop::collection::vec((0i64..5, 0usize..24, 0usize..12, any::<bool>()), 0..8).prop_map(|v| {
        v.into_iter()
            .map(|(permno, start, len, open)| MembershipRow {
                permno,
                start_date: month_end(start),
                end_date: if open { None } else { Some(month_end(start + len)) },
            })
            .collect()
    })
}

fn bits(p: &Panel) -> Vec<(i64, NaiveDate, [u64; 4])> {
    p.rows
        .iter()
        .map(|r| (r.permno, r.date, r.numeric().map(f64::to_bits)))
        .collect()
}

proptest! {
    #[test]
    fn membership_tightness(rows in rows_strategy(), membership in membership_strategy()) {
        let prices = Panel::new(rows);
        let out = merge_and_filter(&prices, &membership);
        let max_date = prices.max_date();
        prop_assert!(out.is_sorted());
        for r in &out.rows {
            let inside = membership.iter().any(|m| {
                m.permno == r.permno
                    && m.start_date <= r.date
                    && r.date <= m.end_date.or(max_date).unwrap()
            });
            prop_assert!(inside, "{:?}", r);
        }
        // Nothing that belongs is lost: every in-interval key survives once.
        let mut expected: Vec<(i64, NaiveDate)> = prices
            .rows
            .iter()
            .filter(|r| membership.iter().any(|m| {
                m.permno == r.permno && m.start_date <= r.date && r.date <= m.end_date.or(max_date).unwrap()
            }))
            .map(|r| (r.permno, r.date))
            .collect();
        expected.sort();
        expected.dedup();
        let got: Vec<(i64, NaiveDate)> = out.rows.iter().map(|r| (r.permno, r.date)).collect();
        prop_assert_eq!(got, expected);
    }

    #[test]
    fn clean_is_idempotent_and_finite(rows in rows_strategy()) {
        let mut panel = Panel::new(rows);
        panel.sort();
        let once = clean(&panel);
        let twice = clean(&once);
        prop_assert_eq!(bits(&once), bits(&twice));
        for r in &once.rows {
            prop_assert!(r.numeric().iter().all(|v| v.is_finite()));
        }
    }

    /// A security's cleaned values depend only on its own rows.
    #[test]
    fn no_cross_security_contamination(rows in rows_strategy(), victim in 0i64..4) {
        let mut panel = Panel::new(rows);
        panel.sort();
        let alone = Panel::new(panel.rows.iter().filter(|r| r.permno == victim).copied().collect());
        let from_all: Vec<_> = bits(&clean(&panel)).into_iter().filter(|r| r.0 == victim).collect();
        prop_assert_eq!(from_all, bits(&clean(&alone)));
    }

    #[test]
    fn cleaned_values_are_observed_or_zero(rows in rows_strategy()) {
        let mut panel = Panel::new(rows);
        panel.sort();
        let out = clean(&panel);
        for range in panel.groups() {
            for c in 0..4 {
                let mut last: Option<f64> = None;
                for i in range.clone() {
                    let raw = panel.rows[i].numeric()[c];
                    if raw.is_finite() {
                        last = Some(raw);
                    }
                    prop_assert_eq!(out.rows[i].numeric()[c].to_bits(), last.unwrap_or(0.0).to_bits());
                }
            }
        }
    }

    #[test]
    fn csv_round_trip(rows in rows_strategy(), membership in membership_strategy()) {
        let dir = tempfile::tempdir().unwrap();
        let mut panel = Panel::new(rows);
        panel.sort();
        let panel = clean(&panel);
        write_prices(dir.path().join("p.csv"), &panel).unwrap();
        write_membership(dir.path().join("m.csv"), &membership).unwrap();
        prop_assert_eq!(bits(&load_prices(dir.path().join("p.csv")).unwrap()), bits(&panel));
        prop_assert_eq!(load_membership(dir.path().join("m.csv")).unwrap(), membership);
    }
}

#[test]
fn rerun_gives_identical_file() {
    let dir = tempfile::tempdir().unwrap();
    let panel = common::random_panel(3, 4, 30);
    let membership = vec![MembershipRow {
        permno: 101,
        start_date: month_end(3),
        end_date: None,
    }];
    let write = |name: &str| {
        let out = clean(&merge_and_filter(&panel, &membership));
        let p = dir.path().join(name);
        write_prices(&p, &out).unwrap();
        std::fs::read(p).unwrap()
    };
    assert_eq!(write("a.csv"), write("b.csv"));
}
