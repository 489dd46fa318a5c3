use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::phantom::{generate_shepp_logan, PhantomMode};
use crate::projector::{radon, uniform_angles};

fn quick_sa() -> SolverSpec {
    SolverSpec::Sa { sweeps: Some(200), restarts: 2, beta_min: 0.1, beta_max: 10.0, polish: true }
}

#[test]
fn partition_examples() {
    let r = partition_regions(100, 50, 0).unwrap();
    let corners: Vec<(usize, usize)> = r.iter().map(|r| (r.row0, r.col0)).collect();
    assert_eq!(corners, vec![(0, 0), (0, 50), (50, 0), (50, 50)]);
    assert!(r.iter().all(|r| r.height == 50 && r.width == 50));
    assert_eq!(partition_regions(12, 12, 0).unwrap(), vec![Region::whole(12, 12)]);
    assert!(partition_regions(8, 9, 0).is_err());
    assert!(partition_regions(10, 4, 0).is_err());
    assert!(partition_regions(8, 4, 4).is_err());
}

#[test]
fn overlapping_partition_covers_every_pixel() {
    let r = partition_regions(8, 4, 2).unwrap();
    assert_eq!(r.len(), 9);
    for row in 0..8 {
        for col in 0..8 {
            assert!(r.iter().any(|g| g.contains(row, col)), "({row}, {col})");
        }
    }
    for (n, s, o) in [(10, 4, 1), (9, 5, 3), (17, 6, 2)] {
        let r = partition_regions(n, s, o).unwrap();
        for row in 0..n {
            for col in 0..n {
                assert!(r.iter().any(|g| g.contains(row, col)));
            }
        }
        assert!(r.iter().all(|g| g.row0 + g.height <= n && g.col0 + g.width <= n));
    }
}

#[test]
fn refine_on_ground_truth_hits_target_and_keeps_region() {
    let img = generate_shepp_logan(16, PhantomMode::Binary).unwrap();
    let g = Geometry::uniform(16, 16).unwrap();
    let target = radon(&img, &g).unwrap();
    let region = Region::new(4, 4, 4, 4);
    let (out, rec) =
        refine_region(&img, &region, &target, &EncodingSpec::binary(), &SolverSpec::Exhaustive, 0).unwrap();
    assert!((rec.achieved - rec.target_min).abs() <= 1e-6 * rec.target_min.abs());
    assert_eq!(out.values(), img.values());
    assert_eq!(rec.n_vars, 16);
    assert_eq!(rec.status, RecordStatus::Solved);
}

#[test]
fn refine_outside_support_sets_zeros() {
    let img = generate_shepp_logan(16, PhantomMode::Binary).unwrap();
    let g = Geometry::uniform(16, 12).unwrap();
    let target = radon(&img, &g).unwrap();
    let region = Region::new(0, 0, 3, 3);
    let mut start = img.clone();
    for (r, c) in region.pixels() {
        start.set(r, c, 1.0);
    }
    let (out, rec) =
        refine_region(&start, &region, &target, &EncodingSpec::binary(), &SolverSpec::Exhaustive, 0).unwrap();
    assert!(region.pixels().all(|(r, c)| out.get(r, c) == 0.0));
    assert_eq!(rec.target_min, 0.0);
    assert_eq!(rec.abs_gap, 0.0);
}

#[test]
fn refine_never_touches_outside_pixels() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let g = Geometry::uniform(10, 6).unwrap();
    let proj = Projector::new(&g);
    for _ in 0..30 {
        let vals: Vec<f64> = (0..100).map(|_| rng.gen_range(0.0..2.0)).collect();
        let img = Image::new(10, 10, vals).unwrap();
        let truth = Image::new(10, 10, (0..100).map(|_| f64::from(rng.gen_range(0..2u8))).collect()).unwrap();
        let target = proj.forward(&truth).unwrap();
        let (h, w) = (rng.gen_range(1..4), rng.gen_range(1..4));
        let region = Region::new(rng.gen_range(0..=10 - h), rng.gen_range(0..=10 - w), h, w);
        let solver = SolverSpec::Sa { sweeps: Some(20), restarts: 1, beta_min: 0.1, beta_max: 5.0, polish: false };
        let (out, _) = refine_region_with(&proj, &img, &region, &target, &EncodingSpec::binary(), &solver, 1).unwrap();
        for r in 0..10 {
            for c in 0..10 {
                if !region.contains(r, c) {
                    assert_eq!(out.get(r, c).to_bits(), img.get(r, c).to_bits());
                }
            }
        }
    }
}

#[test]
fn hole_fill_examples() {
    let flat = Image::new(4, 4, vec![1.0; 16]).unwrap();
    assert_eq!(hole_fill(&flat, &[0.0, 1.0]).unwrap(), flat);

    let mut dot = flat.clone();
    dot.set(1, 2, 0.0);
    assert_eq!(hole_fill(&dot, &[0.0, 1.0]).unwrap(), flat);

    let checker = Image::new(5, 5, (0..25).map(|k| ((k / 5 + k % 5) % 2) as f64).collect()).unwrap();
    assert_eq!(hole_fill(&checker, &[0.0, 1.0]).unwrap(), checker);
    assert!(hole_fill(&flat, &[]).is_err());
}

#[test]
fn hole_fill_is_idempotent() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..50 {
        let img = Image::new(9, 9, (0..81).map(|_| f64::from(rng.gen_range(0..3u8))).collect()).unwrap();
        let once = hole_fill(&img, &[0.0, 1.0, 2.0]).unwrap();
        assert_eq!(hole_fill(&once, &[0.0, 1.0, 2.0]).unwrap(), once);
    }
}

#[test]
fn convergence_examples() {
    let img = generate_shepp_logan(32, PhantomMode::Binary).unwrap();
    let g = Geometry::uniform(32, 16).unwrap();
    let s = radon(&img, &g).unwrap();
    assert!(convergence_check(&s, &s, 1e-15).unwrap());
    let z = Sinogram::zeros(g.clone());
    assert!(convergence_check(&z, &z, 1e-3).unwrap());
    // every bin off by 0.5%: relative RMSE is exactly 0.005
    let bumped = Sinogram::new(g.clone(), s.values().iter().map(|v| v * 1.005).collect(), 1.0).unwrap();
    assert!(!convergence_check(&bumped, &s, 1e-3).unwrap());
    assert!(convergence_check(&bumped, &s, 1e-2).unwrap());
    let other = Sinogram::zeros(Geometry::uniform(32, 8).unwrap());
    assert!(convergence_check(&other, &s, 1.0).is_err());
}

#[test]
fn plan_validation() {
    assert!(StagePlan::with_sizes(&[16, 16], 1).is_err());
    assert!(StagePlan::with_sizes(&[32, 16], 1).is_err());
    assert!(StagePlan::with_sizes(&[], 1).is_err());
    assert!(StagePlan::with_sizes(&[16, 32], 1).is_ok());

    // N = 100 with 50 angles, d = 2, n = 50
    let g = Geometry::uniform(100, 50).unwrap();
    let cfg = ReconstructionConfig::new(
        EncodingSpec::UnitStep { bits: 3 },
        SolverSpec::sa(),
        0,
        StagePlan::with_sizes(&[50], 1).unwrap(),
    );
    cfg.validate_for(&g).unwrap();
    let bad = ReconstructionConfig { plan: StagePlan::with_sizes(&[30], 1).unwrap(), ..cfg.clone() };
    assert!(bad.validate_for(&g).is_err());
    let odd_angles = ReconstructionConfig { plan: StagePlan::with_sizes(&[50], 3).unwrap(), ..cfg };
    assert!(odd_angles.validate_for(&g).is_err());
}

#[test]
fn zero_sinogram_gives_zero_image() {
    let g = Geometry::uniform(16, 8).unwrap();
    let cfg = ReconstructionConfig::new(
        EncodingSpec::binary(),
        quick_sa(),
        3,
        StagePlan::with_sizes(&[8], 2).unwrap(),
    );
    let out = single_stage_reconstruct(&Sinogram::zeros(g), &cfg).unwrap();
    assert!(out.image.values().iter().all(|&v| v == 0.0));
    assert!(out.ledger.iter().all(|r| r.abs_gap == 0.0));
    assert!(out.converged);
}

#[test]
fn single_stage_equals_one_stage_multi_stage() {
    let img = generate_shepp_logan(16, PhantomMode::Binary).unwrap();
    let sino = radon(&img, &Geometry::uniform(16, 16).unwrap()).unwrap();
    let mut plan = StagePlan::with_sizes(&[8], 2).unwrap();
    plan.max_iterations = 2;
    let cfg = ReconstructionConfig::new(EncodingSpec::binary(), quick_sa(), 7, plan);
    let a = single_stage_reconstruct(&sino, &cfg).unwrap();
    let b = multi_stage_reconstruct(&sino, &cfg).unwrap();
    assert_eq!(a, b);
    let two = ReconstructionConfig { plan: StagePlan::with_sizes(&[4, 8], 2).unwrap(), ..cfg };
    assert!(single_stage_reconstruct(&sino, &two).is_err());
}

#[test]
fn overlapping_regions_clear_boundary_stalls() {
    // Without overlap two pixels straddling a region boundary stay wrong;
    // each region is optimal given the other's error.
    let img = generate_shepp_logan(16, PhantomMode::Binary).unwrap();
    let sino = radon(&img, &Geometry::uniform(16, 16).unwrap()).unwrap();
    let cfg = ReconstructionConfig::new(EncodingSpec::binary(), quick_sa(), 1, StagePlan::with_sizes(&[8], 2).unwrap());
    let tiled = single_stage_reconstruct(&sino, &cfg).unwrap();
    let wrong = tiled.image.values().iter().zip(img.values()).filter(|(a, b)| a != b).count();
    assert!(wrong <= 2, "{wrong}");

    let mut plan = cfg.plan.clone();
    plan.overlap = 4;
    let out = single_stage_reconstruct(&sino, &ReconstructionConfig { plan, ..cfg }).unwrap();
    assert_eq!(out.image.values(), img.values());
    assert!(out.converged);
    assert!(out.ledger.last().unwrap().abs_gap <= 1e-6);
}

#[test]
fn binary_sixteen_reconstructs_exactly() {
    let img = generate_shepp_logan(16, PhantomMode::Binary).unwrap();
    let sino = radon(&img, &Geometry::uniform(16, 16).unwrap()).unwrap();
    let mut plan = StagePlan::with_sizes(&[8], 2).unwrap();
    plan.overlap = 2;
    let cfg = ReconstructionConfig::new(EncodingSpec::binary(), quick_sa(), 1, plan);
    let out = single_stage_reconstruct(&sino, &cfg).unwrap();
    assert_eq!(out.image.values(), img.values());
    assert!(out.converged);
    let last = out.ledger.last().unwrap();
    assert!(last.abs_gap <= 1e-6);
    assert_eq!(out.ledger[0].region_label(), "full");
    assert_eq!(out.ledger[1].region_label(), "S1");
    for r in &out.ledger {
        assert!(r.achieved >= r.target_min - 1e-6 * r.target_min.abs());
    }
}

#[test]
fn multi_stage_binary_sixteen_to_sixty_four() {
    let img = generate_shepp_logan(64, PhantomMode::Binary).unwrap();
    let sino = radon(&img, &Geometry::uniform(64, 64).unwrap()).unwrap();
    let mut plan = StagePlan::with_sizes(&[16, 32], 2).unwrap();
    plan.max_iterations = 3;
    let cfg = ReconstructionConfig::new(EncodingSpec::binary(), quick_sa(), 5, plan);
    let out = multi_stage_reconstruct(&sino, &cfg).unwrap();
    let same = out.image.values().iter().zip(img.values()).filter(|(a, b)| a == b).count();
    assert!(same as f64 / 4096.0 >= 0.99, "{same}");
    assert!(out.ledger.iter().any(|r| r.stage == 2) && out.ledger.iter().any(|r| r.stage == 3));
}

#[test]
fn sparse_view_accepts_non_uniform_angles() {
    let img = generate_shepp_logan(16, PhantomMode::IntegerLevels(3)).unwrap();
    let angles = vec![0.0, 7.0, 31.0, 50.0, 88.0, 100.5, 133.0, 170.0];
    let sino = radon(&img, &Geometry::new(16, angles, 16).unwrap()).unwrap();
    let mut plan = StagePlan::with_sizes(&[8], 1).unwrap();
    plan.max_iterations = 2;
    plan.gaussian_sigma = Some(1.0);
    let cfg = ReconstructionConfig::new(EncodingSpec::Radix2 { bits: 2 }, quick_sa(), 2, plan);
    let out = sparse_view_reconstruct(&sino, &cfg).unwrap();
    assert_eq!(out.image.height(), 16);
    let merged = ReconstructionConfig { plan: StagePlan::with_sizes(&[8], 2).unwrap(), ..cfg };
    assert!(sparse_view_reconstruct(&sino, &merged).is_err());
}

#[test]
fn variable_budget_is_enforced() {
    let sino = Sinogram::zeros(Geometry::uniform(16, 8).unwrap());
    let mut cfg = ReconstructionConfig::new(
        EncodingSpec::UnitStep { bits: 3 },
        quick_sa(),
        0,
        StagePlan::with_sizes(&[8], 1).unwrap(),
    );
    cfg.max_vars = 100;
    assert!(matches!(multi_stage_reconstruct(&sino, &cfg), Err(Error::Capacity(_))));
}

#[test]
fn hundred_pixel_regions_have_2500_variables() {
    let img = generate_shepp_logan(100, PhantomMode::Binary).unwrap();
    let sino = radon(&img, &Geometry::new(100, uniform_angles(4), 100).unwrap()).unwrap();
    let mut plan = StagePlan::with_sizes(&[50], 1).unwrap();
    plan.max_iterations = 1;
    let solver = SolverSpec::Sa { sweeps: Some(1), restarts: 1, beta_min: 0.1, beta_max: 1.0, polish: false };
    let cfg = ReconstructionConfig::new(EncodingSpec::binary(), solver, 0, plan);
    let out = single_stage_reconstruct(&sino, &cfg).unwrap();
    assert_eq!(out.ledger.len(), 5);
    assert!(out.ledger.iter().all(|r| r.n_vars == 2500));
}

#[test]
fn region_override_revisits_regions() {
    let img = generate_shepp_logan(16, PhantomMode::Binary).unwrap();
    let sino = radon(&img, &Geometry::uniform(16, 16).unwrap()).unwrap();
    let mut plan = StagePlan::with_sizes(&[8], 2).unwrap();
    plan.regions = Some(vec![Region::new(0, 0, 8, 8), Region::new(4, 4, 8, 8), Region::new(0, 0, 8, 8)]);
    plan.max_iterations = 1;
    let cfg = ReconstructionConfig::new(EncodingSpec::binary(), quick_sa(), 0, plan);
    let out = multi_stage_reconstruct(&sino, &cfg).unwrap();
    let labels: Vec<String> = out.ledger.iter().map(|r| r.region_label()).collect();
    assert_eq!(labels, ["full", "S1", "S2", "S3"]);
}
