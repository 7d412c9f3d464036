use ffpat::field::{embed, restrict, Grid, Medium, ScalarField2D};
use ffpat::harmonic::{forward_u, neumann_v, pair_energy_norm};
use ffpat::phantom::{build_phantom, default_phantoms};
use ffpat::wave::{InitialPair, WaveConfig, WaveStepper};
use ndarray::Array2;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

fn run(stepper: &WaveStepper, obj: Grid, lambda: f64, iters: usize, guard: f64, label: &str) {
    let c_obj = restrict(&stepper.config().medium.c, obj, false);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
    let mut draw = || {
        let mut f = ScalarField2D::new(obj, Array2::from_shape_fn((obj.n, obj.n), |_| StandardNormal.sample(&mut rng))).unwrap();
        f.mask_disc(guard);
        f
    };
    let mut x = InitialPair::new(draw(), draw()).unwrap();
    let s = pair_energy_norm(&x, &c_obj);
    x.f1.values.mapv_inplace(|v| v / s);
    x.f2.values.mapv_inplace(|v| v / s);
    print!("{label}: ");
    for _ in 0..iters {
        let data = forward_u(stepper, obj, &x).unwrap();
        let vu = neumann_v(stepper, obj, &data).unwrap();
        let mut kx = x.clone();
        ndarray::Zip::from(&mut kx.f1.values).and(&vu.f1.values).for_each(|a, &b| *a -= lambda * b);
        ndarray::Zip::from(&mut kx.f2.values).and(&vu.f2.values).for_each(|a, &b| *a -= lambda * b);
        kx.f1.mask_disc(guard);
        kx.f2.mask_disc(guard);
        let ratio = pair_energy_norm(&kx, &c_obj);
        print!("{ratio:.3} ");
        kx.f1.values.mapv_inplace(|v| v / ratio);
        kx.f2.values.mapv_inplace(|v| v / ratio);
        x = kx;
    }
    println!();
}

fn main() {
    // small scale: does a support guard away from the disc edge fix it?
    let obj = Grid::new(51, 1.0).unwrap();
    let sim = Grid::new(201, 4.0).unwrap();
    let (_, c_spec, a_spec) = default_phantoms();
    let c = build_phantom(&c_spec, obj).unwrap();
    let a = build_phantom(&a_spec, obj).unwrap();
    let medium = Medium::new(embed(&c, sim, 1.0), embed(&a, sim, 0.0)).unwrap();
    let cfg = WaveConfig::new(medium, 3.0, 200).unwrap();
    let stepper = WaveStepper::new(cfg).unwrap();
    run(&stepper, obj, 0.5, 12, 1.0, "small guard=1.00");
    run(&stepper, obj, 0.5, 12, 0.95, "small guard=0.95");

    // desk scale, worst lambda
    let obj = Grid::new(101, 1.0).unwrap();
    let sim = Grid::new(401, 4.0).unwrap();
    let c = build_phantom(&c_spec, obj).unwrap();
    let a = build_phantom(&a_spec, obj).unwrap();
    let medium = Medium::new(embed(&c, sim, 1.0), embed(&a, sim, 0.0)).unwrap();
    let cfg = WaveConfig::new(medium, 3.0, 300).unwrap();
    let stepper = WaveStepper::new(cfg).unwrap();
    run(&stepper, obj, 0.5, 12, 1.0, "desk  guard=1.00");
    run(&stepper, obj, 0.5, 12, 0.95, "desk  guard=0.95");
}
