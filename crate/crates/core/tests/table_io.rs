//! Export and re-import of the expansion coefficient table.

use neass_core::caralg::{FockSpace, LatticeGeometry};
use neass_core::dynamics::{Ramp, Schedule, ScheduleTerm};
use neass_core::expansion::{ExpansionConfig, ExpansionEngine, KTable};
use neass_core::io;
use neass_core::linalg::{self, Matrix};

fn hop(space: &FockSpace, x: usize, y: usize) -> Matrix {
    let a = space.creation(x, 0) * space.annihilation(y, 0);
    -(&a + a.adjoint())
}

fn schedule() -> Schedule {
    let space = FockSpace::new(LatticeGeometry::chain(4, 1).unwrap()).unwrap();
    let mut h = Vec::new();
    for x in 0..3 {
        let ramp = if x == 1 { Ramp::Smoothstep { t0: 0.0, t1: 1.0, from: 0.8, to: 1.4 } } else { Ramp::constant(1.0) };
        h.push(ScheduleTerm { sites: vec![x, x + 1], matrix: hop(&space, x, x + 1), ramp });
    }
    for x in 0..4 {
        let mass = if x % 2 == 0 { 0.3 } else { -0.3 };
        h.push(ScheduleTerm {
            sites: vec![x],
            matrix: linalg::scale_real(&space.number(x), mass),
            ramp: Ramp::constant(1.0),
        });
    }
    let p =
        vec![ScheduleTerm { sites: vec![1, 2], matrix: space.number(1) * space.number(2), ramp: Ramp::constant(1.0) }];
    Schedule::new(space, h, p, None, (0.0, 1.0), None).unwrap()
}

fn same_bits(a: &Option<Matrix>, b: &Option<Matrix>) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(a), Some(b)) => {
            a.nrows() == b.nrows()
                && (0..a.nrows()).all(|r| {
                    (0..a.ncols()).all(|c| {
                        a[(r, c)].re.to_bits() == b[(r, c)].re.to_bits()
                            && a[(r, c)].im.to_bits() == b[(r, c)].im.to_bits()
                    })
                })
        }
        _ => false,
    }
}

fn same_rows(a: &[Vec<Option<Matrix>>], b: &[Vec<Option<Matrix>>]) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(ra, rb)| ra.len() == rb.len() && ra.iter().zip(rb).all(|(x, y)| same_bits(x, y)))
}

#[test]
fn exported_tables_reimport_bit_exactly() {
    let s = schedule();
    let engine = ExpansionEngine::new(&s, ExpansionConfig { order: 2, ..Default::default() }).unwrap();
    let table = engine.table(0.35, 2).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let index = io::export_table(dir.path(), &table).unwrap();
    assert!(dir.path().join("index.json").exists());
    assert!(index.entries.iter().all(|e| dir.path().join(&e.file).exists()));

    let back: KTable = io::import_table(dir.path()).unwrap();
    assert_eq!(back.t.to_bits(), table.t.to_bits());
    assert_eq!(back.order, table.order);
    assert!(same_rows(&back.k, &table.k));
    assert!(same_rows(&back.l, &table.l));
    assert!(same_rows(&back.k_dot, &table.k_dot));
    let a = table.assemble(0.1, 0.05, 2).unwrap();
    let b = back.assemble(0.1, 0.05, 2).unwrap();
    assert_eq!(linalg::max_abs(&(&a - &b)), 0.0);
}

#[test]
fn import_rejects_a_foreign_schema() {
    let s = schedule();
    let engine = ExpansionEngine::new(&s, ExpansionConfig::default()).unwrap();
    let table = engine.table(0.5, 1).unwrap();
    let dir = tempfile::tempdir().unwrap();
    io::export_table(dir.path(), &table).unwrap();
    let path = dir.path().join("index.json");
    let text = std::fs::read_to_string(&path).unwrap().replace("\"schema_version\": 1", "\"schema_version\": 99");
    std::fs::write(&path, text).unwrap();
    assert!(io::import_table(dir.path()).is_err());
}
