//! Checkpoint files and series files with JSON sidecars.
//!
//! A checkpoint is `DWCKPT01`, a little-endian `u64` manifest length, the
//! JSON manifest, then one tensor block per parameter tensor (generator
//! tensors first, then critic tensors, each in store order).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use ndarray::{s, Array3, Array4};
use serde::{Deserialize, Serialize};

use super::container::TensorContainer;
use crate::error::{Error, Result};
use crate::forward::{BeamConfig, RadiographSeries, ScatterConfig};
use crate::nn::{ParamStore, ParamTensor};
use crate::phantom::{DensityTimeSeries, GridSpec, SeriesTag};
use crate::training::Checkpoint;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"DWCKPT01";

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointManifest {
    #[serde(flatten)]
    checkpoint: Checkpoint,
    generator_tensors: Vec<TensorEntry>,
    discriminator_tensors: Vec<TensorEntry>,
}

fn entries(store: &ParamStore) -> Vec<TensorEntry> {
    store
        .tensors
        .iter()
        .map(|t| TensorEntry {
            name: t.name.clone(),
            shape: t.shape.clone(),
        })
        .collect()
}

pub fn write_checkpoint(ckpt: &Checkpoint, w: &mut impl Write) -> Result<()> {
    let manifest = CheckpointManifest {
        checkpoint: ckpt.clone(),
        generator_tensors: entries(&ckpt.generator),
        discriminator_tensors: entries(&ckpt.discriminator),
    };
    let json = serde_json::to_vec(&manifest)?;
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;
    for t in ckpt.generator.tensors.iter().chain(&ckpt.discriminator.tensors) {
        TensorContainer::new(t.shape.clone(), t.data.clone())?.write_to(w)?;
    }
    Ok(())
}

fn read_store(r: &mut impl Read, layout: &[TensorEntry]) -> Result<ParamStore> {
    let mut store = ParamStore::default();
    for e in layout {
        let t = TensorContainer::read_from(r)?;
        if t.shape != e.shape {
            return Err(Error::Format(format!("tensor `{}` has shape {:?}, manifest says {:?}", e.name, t.shape, e.shape)));
        }
        store.push(ParamTensor {
            name: e.name.clone(),
            shape: t.shape,
            data: t.data,
        });
    }
    Ok(store)
}

pub fn read_checkpoint(r: &mut impl Read) -> Result<Checkpoint> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Format("not a checkpoint file".into()));
    }
    let mut len = [0u8; 8];
    r.read_exact(&mut len)?;
    let len = u64::from_le_bytes(len) as usize;
    let mut json = vec![0u8; len];
    r.read_exact(&mut json)?;
    let manifest: CheckpointManifest = serde_json::from_slice(&json)?;
    let mut ckpt = manifest.checkpoint;
    ckpt.generator = read_store(r, &manifest.generator_tensors)?;
    ckpt.discriminator = read_store(r, &manifest.discriminator_tensors)?;
    // Validate the layout against the declared architectures.
    ckpt.generator()?;
    crate::nn::Discriminator::for_store(ckpt.discriminator_config.clone(), &ckpt.discriminator)?;
    Ok(ckpt)
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_checkpoint(ckpt, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let mut r = BufReader::new(File::open(path)?);
    let ckpt = read_checkpoint(&mut r)?;
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(Error::Format(format!("{} trailing bytes in checkpoint", rest.len())));
    }
    Ok(ckpt)
}

/// `x.dwt` -> `x.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

#[derive(Serialize, Deserialize)]
struct SeriesSidecar {
    grid: GridSpec,
    norm_factor: f64,
    spec_tag: Option<SeriesTag>,
}

/// Writes the frames (as `f32`) and a JSON sidecar next to them.
pub fn save_series(series: &DensityTimeSeries, path: &Path) -> Result<()> {
    TensorContainer::from_array3(&series.frames).save(path)?;
    let side = SeriesSidecar {
        grid: series.grid,
        norm_factor: series.norm_factor,
        spec_tag: series.spec_tag.clone(),
    };
    std::fs::write(sidecar_path(path), serde_json::to_vec_pretty(&side)?)?;
    Ok(())
}

pub fn load_series(path: &Path) -> Result<DensityTimeSeries> {
    let frames = TensorContainer::load(path)?.to_array3()?;
    let side: SeriesSidecar = serde_json::from_slice(&std::fs::read(sidecar_path(path))?)?;
    Ok(DensityTimeSeries {
        frames,
        grid: side.grid,
        norm_factor: side.norm_factor,
        spec_tag: side.spec_tag,
    })
}

/// Rounds a series through the `f32` storage precision.
pub fn quantize_series(series: &DensityTimeSeries) -> DensityTimeSeries {
    series.with_frames(series.frames.mapv(|v| v as f32 as f64))
}

#[derive(Serialize, Deserialize)]
struct RadiographSidecar {
    beam: BeamConfig,
    scatter_config: ScatterConfig,
    betas: Vec<f64>,
    seed: u64,
    /// Geometry needed to reconstruct densities from the radiographs.
    grid: GridSpec,
    norm_factor: f64,
}

/// `[3, T, H, W]` tensor of direct, scatter and measured transmissions.
pub fn save_radiographs(r: &RadiographSeries, grid: GridSpec, norm_factor: f64, path: &Path) -> Result<()> {
    let d = r.direct.shape();
    let mut all = Array4::<f64>::zeros((3, d[0], d[1], d[2]));
    all.slice_mut(s![0, .., .., ..]).assign(&r.direct);
    all.slice_mut(s![1, .., .., ..]).assign(&r.scatter);
    all.slice_mut(s![2, .., .., ..]).assign(&r.measured);
    TensorContainer::from_f64(all.shape(), all.iter().copied())?.save(path)?;
    let side = RadiographSidecar {
        beam: r.beam,
        scatter_config: r.scatter_config,
        betas: r.betas.clone(),
        seed: r.seed,
        grid,
        norm_factor,
    };
    std::fs::write(sidecar_path(path), serde_json::to_vec_pretty(&side)?)?;
    Ok(())
}

/// Returns the radiographs with the grid and normalization they were made with.
pub fn load_radiographs(path: &Path) -> Result<(RadiographSeries, GridSpec, f64)> {
    let t = TensorContainer::load(path)?;
    if t.shape.len() != 4 || t.shape[0] != 3 {
        return Err(Error::Format(format!("radiograph tensor must be [3, T, H, W], found {:?}", t.shape)));
    }
    let a = t.to_array();
    let part = |k: usize| -> Array3<f64> {
        a.index_axis(ndarray::Axis(0), k).to_owned().into_dimensionality().expect("rank 3")
    };
    let side: RadiographSidecar = serde_json::from_slice(&std::fs::read(sidecar_path(path))?)?;
    Ok((
        RadiographSeries {
            direct: part(0),
            scatter: part(1),
            measured: part(2),
            betas: side.betas,
            beam: side.beam,
            scatter_config: side.scatter_config,
            seed: side.seed,
        },
        side.grid,
        side.norm_factor,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Discriminator, DiscriminatorConfig, Generator, GeneratorConfig};

    fn checkpoint(val_score: f64) -> Checkpoint {
        let (gcfg, dcfg) = (GeneratorConfig::new([4, 16, 16]), DiscriminatorConfig::new([4, 16, 16]).with_blocks(4));
        Checkpoint {
            generator: Generator::new(gcfg.clone(), 1).unwrap().1,
            discriminator: Discriminator::new(dcfg.clone(), 2).unwrap().1,
            generator_config: gcfg,
            discriminator_config: dcfg,
            grid: GridSpec::spanning(16, 11.0),
            seed: 3,
            epoch: 4,
            val_score,
        }
    }

    #[test]
    fn checkpoints_round_trip_exactly() {
        // The second value needs correctly rounded float parsing to survive the
        // untyped buffering behind `#[serde(flatten)]`.
        for v in [0.1 + 0.2, 0.36112807503612476, 1.0 / 3.0, 2.2250738585072014e-308] {
            let ck = checkpoint(v);
            let mut bytes = Vec::new();
            write_checkpoint(&ck, &mut bytes).unwrap();
            let back = read_checkpoint(&mut bytes.as_slice()).unwrap();
            assert_eq!(back.val_score.to_bits(), v.to_bits());
            assert_eq!(back, ck);
        }
    }

    #[test]
    fn truncated_checkpoints_are_rejected() {
        let mut bytes = Vec::new();
        write_checkpoint(&checkpoint(0.5), &mut bytes).unwrap();
        bytes.truncate(bytes.len() - 3);
        assert!(read_checkpoint(&mut bytes.as_slice()).is_err());
        assert!(read_checkpoint(&mut &b"DWTENSR1"[..]).is_err());
    }
}
