//! Bundled clouds, generated from the seed so they need no data files.

use std::f64::consts::TAU;
use std::path::Path;

use mmspace::euclid::{sample_body, ConvexBody};
use mmspace::heisenberg::sample_haar_box;
use mmspace::measure::{Descriptor, MeasureRecord};
use mmspace::modelspaces::{sample_cone, sample_sphere};
use mmspace::{DiscreteMeasure, SpaceTag};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{read_typed, CliError};

/// Stream `stream` of the ChaCha8 generator seeded with `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn unit_square() -> ConvexBody {
    ConvexBody::cube(&[0.0, 0.0], &[1.0, 1.0]).expect("unit square is a valid body")
}

/// Clouds for the Euclidean structure pipeline, each of total mass 1.
pub fn theorem1_cloud<R: Rng>(name: &str, n: usize, rng: &mut R) -> Result<DiscreteMeasure, CliError> {
    let w = 1.0 / n as f64;
    let m = match name {
        // flat square inside ℝ³
        "square" => {
            let coords = (0..n).map(|_| vec![rng.random::<f64>(), rng.random::<f64>(), 0.0]).collect();
            DiscreteMeasure::uniform(SpaceTag::Euclid(3), coords, w, None)?
        }
        "disk" => {
            let disk = ConvexBody::ball(vec![0.0, 0.0], 1.0)?;
            sample_body(&disk, n, rng)?.normalized()?
        }
        "circle" => {
            let coords = (0..n)
                .map(|_| {
                    let a = TAU * rng.random::<f64>();
                    vec![a.cos(), a.sin()]
                })
                .collect();
            DiscreteMeasure::uniform(SpaceTag::Euclid(2), coords, w, None)?
        }
        // half uniform on the unit square, half an atom at its center
        "half-atom" => {
            let mut atoms: Vec<(Vec<f64>, f64)> =
                (0..n).map(|_| (vec![rng.random::<f64>(), rng.random::<f64>()], 0.5 * w)).collect();
            atoms.push((vec![0.5, 0.5], 0.5));
            DiscreteMeasure::from_weighted(SpaceTag::Euclid(2), atoms, None)?
        }
        other => {
            return Err(CliError::Usage(format!("unknown fixture `{other}` (square, disk, circle, half-atom)")));
        }
    };
    Ok(m)
}

pub fn load_measure(path: &Path) -> Result<DiscreteMeasure, CliError> {
    let record: MeasureRecord = read_typed(path, "measure")?;
    Ok(DiscreteMeasure::try_from(record)?)
}

/// Reference cloud on `tag`: Haar on `[−w, w]^{2n+1}`, uniform on the unit cube, the sphere's
/// surface measure or the cone of radius 1. `name` may also be a measure file.
pub fn reference_measure<R: Rng>(
    tag: SpaceTag,
    name: &str,
    n: usize,
    half_width: f64,
    rng: &mut R,
) -> Result<DiscreteMeasure, CliError> {
    let analytic = match (name, tag) {
        ("auto" | "haar", SpaceTag::Heisenberg(k)) => {
            let (lo, hi) = (vec![-half_width; 2 * k + 1], vec![half_width; 2 * k + 1]);
            sample_haar_box(n, &lo, &hi, rng)?
        }
        ("auto" | "uniform", SpaceTag::Euclid(d)) => sample_body(&ConvexBody::cube(&vec![0.0; d], &vec![1.0; d])?, n, rng)?,
        ("auto" | "surface", SpaceTag::Sphere2) => sample_sphere(n, rng)?,
        ("auto" | "surface", SpaceTag::Cone { theta }) => sample_cone(theta, 1.0, n, rng)?,
        ("haar" | "uniform" | "surface", _) => {
            return Err(CliError::Usage(format!("measure `{name}` is not available on {tag}")));
        }
        (path, _) => {
            let m = load_measure(Path::new(path))?;
            if m.space() != tag {
                return Err(CliError::Usage(format!("measure file lives on {}, not {tag}", m.space())));
            }
            return Ok(m);
        }
    };
    Ok(analytic)
}

/// Atoms of equal weight `1/n` on `tag`, drawn like [`reference_measure`].
pub fn random_atoms<R: Rng>(tag: SpaceTag, n: usize, rng: &mut R) -> Result<DiscreteMeasure, CliError> {
    let m = reference_measure(tag, "auto", n, 1.0, rng)?;
    let coords = m.particles().iter().map(|p| p.point.coords.clone()).collect();
    Ok(DiscreteMeasure::uniform(tag, coords, 1.0 / n as f64, Some(Descriptor::AtomList))?)
}
