//! Acceptance checks. Prints one PASS/FAIL/SKIP line per criterion and exits
//! nonzero if any criterion fails.
//!
//! Criterion 8 needs a real checkpoint: set `WQUANT_CHECKPOINT_MANIFEST` to a
//! weight manifest to run it.

use std::collections::BTreeMap;
use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use wquant::container::{decode_container, encode_container};
use wquant::pack::packed_len;
use wquant::pipeline::TensorOutcome;
use wquant::pwlq::{breakpoint_for_values, pwlq_mse};
use wquant::tensor::resolve_exclusions;
use wquant::{
    affine_params, breakpoint_approx, breakpoint_bruteforce, dequantize_tensor, element_index,
    figure_of_merit, memory_bytes, memory_saving_ratio, pack_codes, partition, quant_error,
    quantize_model, quantize_slice, quantize_tensor, select_granularity, summarize, sweep,
    symmetric_params, to_storage_precision, uniform_dequantize, uniform_quantize, unpack_codes,
    BreakpointMode, ClipRange, DType, Granularity, GranularityChoice, GroupParams, MemoryModel,
    Method, ModelWeights, PackedCodes, PwlqCode, QuantizeConfig, Scheme, SymmetricVariant,
    TensorShape, WeightTensor,
};

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

type Check = fn() -> Outcome;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn gaussian(n: usize, sigma: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = Normal::new(0.0, sigma).unwrap();
    (0..n).map(|_| d.sample(&mut rng)).collect()
}

fn tensor(name: &str, dims: [usize; 4], sigma: f64, seed: u64) -> WeightTensor {
    let shape = TensorShape::new(dims[0], dims[1], dims[2], dims[3]).unwrap();
    WeightTensor::new(
        name,
        shape,
        gaussian(shape.element_count(), sigma, seed),
        DType::F32,
    )
    .unwrap()
}

fn affine_mse(values: &[f64], bits: u8) -> f64 {
    let (params, codes) = quantize_slice(values, Scheme::Affine, bits).unwrap();
    values
        .iter()
        .zip(&codes)
        .map(|(&r, &c)| (uniform_dequantize(c, &params).unwrap() - r).powi(2))
        .sum::<f64>()
        / values.len() as f64
}

// ---------------------------------------------------------------------------
// 1. scalar oracle values

struct Cases {
    total: usize,
    failures: Vec<String>,
}

impl Cases {
    fn real(&mut self, name: &str, got: f64, want: f64) {
        self.total += 1;
        let tol = 1e-6 * want.abs().max(f64::MIN_POSITIVE);
        if (got - want).abs() > tol {
            self.failures
                .push(format!("{name}: got {got}, want {want}"));
        }
    }

    fn exact<T: PartialEq + std::fmt::Debug>(&mut self, name: &str, got: T, want: T) {
        self.total += 1;
        if got != want {
            self.failures
                .push(format!("{name}: got {got:?}, want {want:?}"));
        }
    }
}

fn scalar_oracle() -> Outcome {
    let mut c = Cases {
        total: 0,
        failures: Vec::new(),
    };

    let s = TensorShape::new(2, 3, 4, 5).unwrap();
    c.exact(
        "element_index(1,2,3,4)",
        element_index(&s, 1, 2, 3, 4).unwrap(),
        119,
    );
    c.exact(
        "fshape groups (2,3,4,5)",
        Granularity::FShapeWise.group_count(&s),
        60,
    );
    let sizes: Vec<usize> = partition(s, Granularity::FShapeWise)
        .members()
        .iter()
        .map(Vec::len)
        .collect();
    c.exact("fshape group size", sizes.iter().all(|&n| n == 2), true);

    let p = affine_params(ClipRange::new(-1.0, 1.0).unwrap(), 4).unwrap();
    c.real("affine [-1,1] k4 scale", p.scale, 0.13333333333333333);
    c.exact("affine [-1,1] k4 zero", p.zero_point, 0);
    let p8 = affine_params(ClipRange::new(0.0, 1.0).unwrap(), 8).unwrap();
    c.real("affine [0,1] k8 scale", p8.scale, 0.00392156862745098);
    c.exact("affine [0,1] k8 zero", p8.zero_point, -128);
    c.real(
        "sym restricted a=1 k8",
        symmetric_params(1.0, 8, SymmetricVariant::Restricted)
            .unwrap()
            .scale,
        0.007874015748031496,
    );
    c.real(
        "sym full a=1 k8",
        symmetric_params(1.0, 8, SymmetricVariant::Full)
            .unwrap()
            .scale,
        0.00784313725490196,
    );
    c.exact("quantize 0.5", uniform_quantize(0.5, &p), 4);
    c.real(
        "dequantize 4",
        uniform_dequantize(4, &p).unwrap(),
        0.5333333333333333,
    );

    let (_, codes) = quantize_slice(&[-1.0, 0.0, 1.0], Scheme::Affine, 4).unwrap();
    c.exact("slice [-1,0,1] k4", codes, vec![-8, 0, 7]);
    let (p2, codes) = quantize_slice(&[0.0, 0.25, 0.5, 1.0], Scheme::Affine, 2).unwrap();
    c.exact("slice k2 codes", codes.clone(), vec![-2, -1, -1, 1]);
    let back: Vec<f64> = codes
        .iter()
        .map(|&q| uniform_dequantize(q, &p2).unwrap())
        .collect();
    for (i, (g, w)) in back
        .iter()
        .zip([0.0, 0.3333333333333333, 0.3333333333333333, 1.0])
        .enumerate()
    {
        c.real(&format!("slice k2 dequantized[{i}]"), *g, w);
    }

    c.real(
        "breakpoint m=1",
        breakpoint_approx(1.0).unwrap(),
        0.3847860968997636,
    );
    c.real("breakpoint m=0.1", breakpoint_approx(0.1).unwrap(), 0.005);

    let pw = wquant::PwlqParams::new(4, 1.0, 0.385).unwrap();
    c.real("tail scale", pw.pos_tail.scale, 0.08785714285714286);
    c.exact("tail zero", pw.pos_tail.zero_point, -8);
    let code = pw.encode(0.9);
    c.exact(
        "tail code 0.9",
        code,
        PwlqCode::Tail {
            negative: false,
            code: 2,
        },
    );
    c.real("tail decode", pw.decode(code).unwrap(), 0.8785714285714286);
    c.real(
        "center 7",
        pw.decode(PwlqCode::Center(7)).unwrap(),
        0.35933333333333334,
    );

    let t = WeightTensor::new(
        "t",
        TensorShape::new(2, 1, 1, 2).unwrap(),
        vec![1.0, 2.0, 3.0, 4.0],
        DType::F32,
    )
    .unwrap();
    let q = quantize_tensor(
        &t,
        Granularity::FilterWise,
        Method::Affine,
        2,
        BreakpointMode::Approx,
    )
    .unwrap();
    for (g, z) in [(0, -5), (1, -11)] {
        match &q.group_params[g] {
            GroupParams::Uniform(u) => {
                c.real(
                    &format!("filter group {g} scale"),
                    u.scale,
                    0.3333333333333333,
                );
                c.exact(&format!("filter group {g} zero"), u.zero_point, z);
            }
            other => c.failures.push(format!("filter group {g}: {other:?}")),
        }
    }
    c.exact("filter codes", q.codes.clone(), vec![-2, 1, -2, 1]);
    c.exact(
        "filter dequantized",
        dequantize_tensor(&q).unwrap().values,
        vec![1.0, 2.0, 3.0, 4.0],
    );
    c.exact("filter mse", quant_error(&t, &q).unwrap().mse, 0.0);

    let t3 = WeightTensor::new(
        "t3",
        TensorShape::new(3, 1, 1, 1).unwrap(),
        vec![0.0, 0.5, 1.0],
        DType::F32,
    )
    .unwrap();
    let q3 = quantize_tensor(
        &t3,
        Granularity::LayerWise,
        Method::Affine,
        2,
        BreakpointMode::Approx,
    )
    .unwrap();
    c.real(
        "layer mse [0,.5,1]",
        quant_error(&t3, &q3).unwrap().mse,
        0.00925925925925926,
    );

    let mm = MemoryModel::default();
    let big = TensorShape::new(64, 64, 3, 3).unwrap();
    let zeros = WeightTensor::new("w", big, vec![0.0; big.element_count()], DType::F16).unwrap();
    for (g, bytes, ratio) in [
        (Granularity::FShapeWise, 20736u64, 3.5555555555555554),
        (Granularity::LayerWise, 18436, 3.999132132783684),
    ] {
        let q = quantize_tensor(&zeros, g, Method::Affine, 4, BreakpointMode::Approx).unwrap();
        c.exact(&format!("{g} bytes"), memory_bytes(&q, &mm), bytes);
        c.real(
            &format!("{g} ratio"),
            memory_saving_ratio(&[q], &mm).unwrap(),
            ratio,
        );
    }
    c.exact(
        "baseline bytes",
        mm.baseline_bytes(big.element_count()),
        73728,
    );

    c.exact(
        "pack [1,-1]",
        pack_codes(&[1, -1], 4).unwrap().data,
        vec![0x79],
    );
    c.exact(
        "unpack 0x79",
        unpack_codes(&PackedCodes {
            bits: 4,
            count: 2,
            data: vec![0x79],
        })
        .unwrap(),
        vec![1, -1],
    );
    c.exact(
        "exclude bn*",
        resolve_exclusions(["conv1", "bn1"], &["bn*"]).unwrap(),
        ["bn1".to_string()].into_iter().collect(),
    );
    c.real("fom (3.86, 1.0)", figure_of_merit(3.86, 1.0).unwrap(), 1.93);
    c.real("fom (3.92, 2.5)", figure_of_merit(3.92, 2.5).unwrap(), 1.12);

    let detail = format!("{} cases, {} mismatches", c.total, c.failures.len());
    if c.failures.is_empty() && c.total >= 20 {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(format!("{detail}: {}", c.failures.join("; ")))
    }
}

// ---------------------------------------------------------------------------
// 2. uniform round-trip bound

fn round_trip_bound() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut violations = 0;
    let mut worst: f64 = 0.0;
    const CASES: usize = 100_000;
    for _ in 0..CASES {
        let bits = rng.gen_range(2..=8u8);
        let scale = 10f64.powf(rng.gen_range(-4.0..3.0));
        let params = match rng.gen_range(0..3) {
            0 => {
                let a = rng.gen_range(-1.0..1.0) * scale;
                let b = rng.gen_range(-1.0..1.0) * scale;
                if a == b {
                    continue;
                }
                affine_params(ClipRange::new(a.min(b), a.max(b)).unwrap(), bits).unwrap()
            }
            1 => symmetric_params(
                rng.gen_range(0.01..1.0) * scale,
                bits,
                SymmetricVariant::Restricted,
            )
            .unwrap(),
            _ => symmetric_params(
                rng.gen_range(0.01..1.0) * scale,
                bits,
                SymmetricVariant::Full,
            )
            .unwrap(),
        };
        let (lo, hi) = (params.clip.beta, params.clip.alpha);
        let r = if rng.gen_bool(0.05) {
            if rng.gen_bool(0.5) {
                lo
            } else {
                hi
            }
        } else {
            rng.gen_range(lo..=hi)
        };
        let back = uniform_dequantize(uniform_quantize(r, &params), &params).unwrap();
        let err = (back - r).abs();
        worst = worst.max(err / params.scale);
        if err > params.scale {
            violations += 1;
        }
    }
    ensure(
        violations == 0,
        format!("{CASES} cases, {violations} violations, worst |err|/s = {worst:.6}"),
    )
}

// ---------------------------------------------------------------------------
// 3. packing bijection and container round trip

fn pack_and_container() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut pack_failures = 0;
    for _ in 0..1000 {
        let bits = rng.gen_range(2..=8u8);
        let half = 1i32 << (bits - 1);
        let len = rng.gen_range(0..600);
        let codes: Vec<i32> = (0..len).map(|_| rng.gen_range(-half..half)).collect();
        let packed = pack_codes(&codes, bits).unwrap();
        if packed.data.len() != packed_len(len, bits) || unpack_codes(&packed).unwrap() != codes {
            pack_failures += 1;
        }
    }

    let bp = BreakpointMode::Approx;
    let base = vec![
        quantize_tensor(
            &tensor("conv.affine", [16, 8, 3, 3], 0.05, 30),
            Granularity::FShapeWise,
            Method::Affine,
            4,
            bp,
        ),
        quantize_tensor(
            &tensor("conv.symr", [8, 8, 3, 3], 0.1, 31),
            Granularity::FilterWise,
            Method::SymmetricRestricted,
            5,
            bp,
        ),
        quantize_tensor(
            &tensor("conv.symf", [8, 4, 5, 5], 0.02, 32),
            Granularity::CShapeWise,
            Method::SymmetricFull,
            3,
            bp,
        ),
        quantize_tensor(
            &tensor("conv.pwlq", [12, 6, 3, 3], 0.07, 33),
            Granularity::ChannelWise,
            Method::Pwlq,
            4,
            BreakpointMode::bruteforce(),
        ),
        quantize_tensor(
            &tensor("pw.passthrough", [8, 4, 1, 1], 0.3, 34),
            Granularity::ChannelWise,
            Method::Affine,
            8,
            bp,
        ),
    ]
    .into_iter()
    .collect::<wquant::Result<Vec<_>>>()
    .unwrap();
    let mm = MemoryModel::default();
    let bytes = encode_container(&base, &mm).unwrap();
    let (back, mm_back) = decode_container(&bytes).unwrap();
    let expected: Vec<_> = base.iter().map(to_storage_precision).collect();
    let container_ok = back == expected
        && mm_back == mm
        && encode_container(&back, &mm).unwrap() == bytes
        && back[4].is_passthrough();

    ensure(
        pack_failures == 0 && container_ok,
        format!(
            "1000 pack cases, {pack_failures} failures; 5-tensor container ({} bytes) {}",
            bytes.len(),
            if container_ok {
                "field-exact"
            } else {
                "MISMATCH"
            }
        ),
    )
}

// ---------------------------------------------------------------------------
// 4 and 5. PWLQ versus affine, breakpoint quality

const SEEDS: u64 = 100;
const PWLQ_ELEMENTS: usize = 10_000;

fn pwlq_beats_affine() -> Outcome {
    let wins = (0..SEEDS)
        .filter(|&seed| {
            let v = gaussian(PWLQ_ELEMENTS, 1.0, 400 + seed);
            let p = breakpoint_for_values(&v).unwrap();
            pwlq_mse(&v, 4, p).unwrap() < affine_mse(&v, 4)
        })
        .count();
    ensure(
        wins >= 95,
        format!("PWLQ lower MSE in {wins}/{SEEDS} seeds (need 95)"),
    )
}

fn breakpoint_quality() -> Outcome {
    let mut grid_worse = 0;
    let mut within = 0;
    let mut worst: f64 = 0.0;
    for seed in 0..SEEDS {
        let v = gaussian(PWLQ_ELEMENTS, 1.0, 400 + seed);
        let approx = pwlq_mse(&v, 4, breakpoint_for_values(&v).unwrap()).unwrap();
        let grid = pwlq_mse(&v, 4, breakpoint_bruteforce(&v, 4, 64).unwrap()).unwrap();
        if grid > approx {
            grid_worse += 1;
        }
        if approx <= 1.10 * grid {
            within += 1;
        }
        worst = worst.max(approx / grid);
    }
    ensure(
        grid_worse == 0 && within >= 90,
        format!(
            "grid > approx in {grid_worse} seeds; approx <= 1.10*grid in {within}/{SEEDS} (need 90); worst ratio {worst:.4}"
        ),
    )
}

// ---------------------------------------------------------------------------
// 6. selector optimality

fn random_dims(rng: &mut ChaCha8Rng) -> [usize; 4] {
    let k = [1, 3, 5][rng.gen_range(0..3)];
    [rng.gen_range(2..24), rng.gen_range(1..16), k, k]
}

fn selector_optimality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let candidates = GranularityChoice::Auto.candidates();
    let mut mismatches = Vec::new();
    let mut tensors = Vec::new();
    for i in 0..50 {
        let dims = random_dims(&mut rng);
        let sigma = rng.gen_range(0.01..0.5);
        let t = tensor(&format!("t{i}"), dims, sigma, 600 + i);
        let (method, bits) = if i % 2 == 0 {
            (Method::Affine, 4)
        } else {
            (Method::Pwlq, 4)
        };
        let chosen =
            select_granularity(&t, &candidates, method, bits, BreakpointMode::Approx).unwrap();
        let min = candidates
            .iter()
            .filter(|g| !g.is_passthrough_for(&t.shape))
            .map(|&g| {
                let q = quantize_tensor(&t, g, method, bits, BreakpointMode::Approx).unwrap();
                quant_error(&t, &q).unwrap().mse
            })
            .fold(f64::INFINITY, f64::min);
        if chosen.error.mse != min {
            mismatches.push(format!(
                "{}: chose {} mse {} vs min {}",
                t.name, chosen.scheme, chosen.error.mse, min
            ));
        }
        tensors.push(t);
    }

    let model = ModelWeights::new(tensors).unwrap();
    let mm = MemoryModel::default();
    let total = |g: GranularityChoice| {
        let cfg = QuantizeConfig {
            method: Method::Pwlq,
            bits: 4,
            granularity: g,
            breakpoint: BreakpointMode::Approx,
        };
        let outcomes: Vec<TensorOutcome> = quantize_model(&model, &cfg).unwrap();
        summarize(&outcomes, &mm).unwrap().total_mse
    };
    let mixed = total(GranularityChoice::Auto3);
    let mut beaten = Vec::new();
    for g in GranularityChoice::Auto3.candidates() {
        let fixed = total(GranularityChoice::Fixed(g));
        if mixed > fixed {
            beaten.push(format!("{g}: {fixed} < {mixed}"));
        }
    }
    let detail = format!(
        "50 tensors, {} selector mismatches; auto3 total {mixed:.6e}, beaten by {} fixed schemes",
        mismatches.len(),
        beaten.len()
    );
    if mismatches.is_empty() && beaten.is_empty() {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(format!(
            "{detail}: {} {}",
            mismatches.join("; "),
            beaten.join("; ")
        ))
    }
}

// ---------------------------------------------------------------------------
// 7. memory-model arithmetic

fn memory_arithmetic() -> Outcome {
    let mm = MemoryModel::default();
    let shape = TensorShape::new(64, 64, 3, 3).unwrap();
    let t = tensor("w", [64, 64, 3, 3], 0.05, 7);
    assert_eq!(t.shape, shape);
    let ratio = |g| {
        let q = quantize_tensor(&t, g, Method::Affine, 4, BreakpointMode::Approx).unwrap();
        memory_saving_ratio(&[q], &mm).unwrap()
    };
    let fshape = ratio(Granularity::FShapeWise);
    let layer = ratio(Granularity::LayerWise);
    let examples_ok = format!("{fshape:.4}") == "3.5556" && format!("{layer:.4}") == "3.9991";

    // two filter-wise layers whose groups-per-element is about 5e-5
    let big: Vec<_> = [[64usize, 2048, 3, 3], [32, 4096, 3, 3]]
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let t = tensor(&format!("big{i}"), *d, 0.05, 70 + i as u64);
            quantize_tensor(
                &t,
                Granularity::FilterWise,
                Method::Affine,
                4,
                BreakpointMode::Approx,
            )
            .unwrap()
        })
        .collect();
    let groups: usize = big.iter().map(|q| q.group_count()).sum();
    let elements: usize = big.iter().map(|q| q.element_count()).sum();
    let density = groups as f64 / elements as f64;
    let big_ratio = memory_saving_ratio(&big, &mm).unwrap();
    let big_ok = density < 1e-4 && (3.96..4.0).contains(&big_ratio);
    ensure(
        examples_ok && big_ok,
        format!("f-shape {fshape:.4}, layer {layer:.4}; G/E = {density:.2e} gives {big_ratio:.4}"),
    )
}

// ---------------------------------------------------------------------------
// 8. real checkpoint

fn real_checkpoint() -> Outcome {
    let Ok(path) = std::env::var("WQUANT_CHECKPOINT_MANIFEST") else {
        return Outcome::Skip("set WQUANT_CHECKPOINT_MANIFEST to run".into());
    };
    let model = match wquant::load_manifest(&path) {
        Ok(m) => m,
        Err(e) => return Outcome::Fail(format!("loading {path}: {e}")),
    };
    let mm = MemoryModel::default();
    let ratio = |method, g| {
        let cfg = QuantizeConfig {
            method,
            bits: 4,
            granularity: GranularityChoice::Fixed(g),
            breakpoint: BreakpointMode::Approx,
        };
        summarize(&quantize_model(&model, &cfg).unwrap(), &mm)
            .unwrap()
            .memory_saving
    };
    let affine = ratio(Method::Affine, Granularity::FShapeWise);
    let pwlq = ratio(Method::Pwlq, Granularity::FShapeWise);
    let channel = ratio(Method::Affine, Granularity::ChannelWise);
    ensure(
        (affine - 3.93).abs() <= 0.10
            && (pwlq - 3.87).abs() <= 0.10
            && (channel - 1.68).abs() <= 0.15,
        format!("affine f-shape {affine:.4}, pwlq f-shape {pwlq:.4}, channel {channel:.4}"),
    )
}

// ---------------------------------------------------------------------------
// 9. sweep monotonicity

fn sweep_monotonicity() -> Outcome {
    let layers = [
        [32usize, 16, 3, 3],
        [64, 32, 3, 3],
        [64, 64, 1, 1],
        [16, 3, 5, 5],
    ];
    let model = ModelWeights::new(
        layers
            .iter()
            .enumerate()
            .map(|(i, d)| tensor(&format!("conv{i}"), *d, 0.05, 900 + i as u64))
            .collect(),
    )
    .unwrap();
    let cfg = QuantizeConfig {
        method: Method::Pwlq,
        bits: 3,
        granularity: GranularityChoice::Auto3,
        breakpoint: BreakpointMode::Approx,
    };
    let rows = sweep(
        &model,
        &cfg,
        3..=8,
        &MemoryModel::default(),
        &BTreeMap::new(),
    )
    .unwrap();
    let mse_ok = rows.windows(2).all(|w| w[1].total_mse <= w[0].total_mse);
    let ratio_ok = rows
        .windows(2)
        .all(|w| w[1].memory_saving < w[0].memory_saving);
    let table: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "k={} mse={:.3e} x{:.3}",
                r.bits, r.total_mse, r.memory_saving
            )
        })
        .collect();
    ensure(mse_ok && ratio_ok, table.join(", "))
}

fn main() -> ExitCode {
    let checks: [(u8, &str, Check); 9] = [
        (1, "scalar oracle suite", scalar_oracle),
        (2, "uniform round-trip bound", round_trip_bound),
        (
            3,
            "pack/unpack and container round trip",
            pack_and_container,
        ),
        (4, "PWLQ beats affine", pwlq_beats_affine),
        (5, "breakpoint quality", breakpoint_quality),
        (6, "selector optimality", selector_optimality),
        (7, "memory-model arithmetic", memory_arithmetic),
        (8, "real checkpoint ratios", real_checkpoint),
        (9, "sweep monotonicity", sweep_monotonicity),
    ];
    let mut failed = 0;
    for (id, name, check) in checks {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|_| Outcome::Fail("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Outcome::Skip(d) => ("SKIP", d),
        };
        println!("criterion {id} [{tag}] {name} ({secs:.1}s): {detail}");
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
