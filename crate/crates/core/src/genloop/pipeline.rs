use serde::{Deserialize, Serialize};

use super::masks::{all_builtin_masks, builtin_mask_set, next_mask_indices, set_for_iteration, MASKS_PER_SET};
use super::{check_variation, stochastic_vary, BackendRequest, StochasticParams, VariationBackend};
use crate::denoise::{denoise, DEFAULT_THRESHOLD};
use crate::drc::{self, RuleSet};
use crate::error::{Error, Result};
use crate::grid::{MaskSetId, MaskSpec, PatternGrid};
use crate::metrics::{canonical_hash, density, h1, h2, noise_level, silhouette, PatternLibrary, Provenance};
use crate::par::Executor;
use crate::seed::derive_seed;
use crate::selection::{select_representatives, SelectionConfig};

const TAG_SELECT: u64 = 1;
const TAG_JOB: u64 = 2;
const TAG_DENOISE: u64 = 3;
const TAG_SILHOUETTE: u64 = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationConfig {
    /// Rounds after the initial one.
    pub iterations: usize,
    pub variations_per_mask: usize,
    /// Masks per selected pattern in later rounds, at most 4.
    #[serde(default = "default_masks_per_pattern")]
    pub masks_per_pattern: usize,
    pub k_select: usize,
    #[serde(default = "default_threshold")]
    pub denoise_threshold: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_min_density")]
    pub min_density: f64,
    #[serde(default)]
    pub silhouette_k: Option<usize>,
    /// Parameters for the built-in backend.
    #[serde(default)]
    pub stochastic: StochasticParams,
}

fn default_masks_per_pattern() -> usize {
    1
}

fn default_threshold() -> usize {
    DEFAULT_THRESHOLD
}

fn default_min_density() -> f64 {
    0.40
}

impl GenerationConfig {
    pub fn new(iterations: usize, variations_per_mask: usize, k_select: usize, seed: u64) -> Self {
        Self {
            iterations,
            variations_per_mask,
            masks_per_pattern: default_masks_per_pattern(),
            k_select,
            denoise_threshold: default_threshold(),
            seed,
            min_density: default_min_density(),
            silhouette_k: None,
            stochastic: StochasticParams::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("iterations", self.iterations),
            ("variations_per_mask", self.variations_per_mask),
            ("masks_per_pattern", self.masks_per_pattern),
            ("k_select", self.k_select),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if self.masks_per_pattern >= MASKS_PER_SET {
            return Err(Error::Config(format!(
                "masks_per_pattern must be below {MASKS_PER_SET} so a lineage never repeats a mask"
            )));
        }
        if !(0.0..=1.0).contains(&self.min_density) {
            return Err(Error::Config("min_density must be in [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.stochastic.jitter_rate)
            || !(0.0..=1.0).contains(&self.stochastic.new_track_prob)
        {
            return Err(Error::Config("stochastic probabilities must be in [0, 1]".into()));
        }
        if self.silhouette_k.is_some_and(|k| k < 2) {
            return Err(Error::Config("silhouette_k must be at least 2".into()));
        }
        Ok(())
    }
}

/// Library-level numbers at one point in time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotStats {
    pub unique: usize,
    pub h1: f64,
    pub h2: f64,
    pub mean_density: f64,
    pub silhouette: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationStats {
    pub iteration: usize,
    pub parents: usize,
    /// Variations requested from the backend.
    pub attempted: usize,
    /// Variations failing the shape or mask-preservation contract.
    pub rejected: usize,
    /// Jobs whose backend call failed twice.
    pub backend_failures: usize,
    /// Denoised variations passing DRC, duplicates included.
    pub legal: usize,
    /// `legal / attempted`.
    pub success_rate: f64,
    pub inserted: usize,
    #[serde(flatten)]
    pub library: SnapshotStats,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub library: PatternLibrary,
    pub starters: SnapshotStats,
    pub series: Vec<IterationStats>,
}

struct Job {
    parent: usize,
    mask: MaskSpec,
    seed: u64,
}

#[derive(Default)]
struct JobResult {
    legal: Vec<PatternGrid>,
    legal_count: usize,
    rejected: usize,
    failed: bool,
}

fn set_code(s: MaskSetId) -> u64 {
    match s {
        MaskSetId::Default => 0,
        MaskSetId::Horizontal => 1,
        MaskSetId::Custom => 2,
    }
}

fn hash_prefix(g: &PatternGrid) -> u64 {
    let h = canonical_hash(g);
    u64::from_le_bytes(h[..8].try_into().expect("8 bytes"))
}

/// Copies the parent's pixels back outside the mask. Snapping a line that
/// sits next to the mask boundary can move pixels across it.
pub fn restore_known(parent: &PatternGrid, mask: &MaskSpec, mut img: PatternGrid) -> PatternGrid {
    let w = parent.width();
    for (i, inside) in mask.raster(w, parent.height()).into_iter().enumerate() {
        if !inside {
            img.set(i % w, i / w, parent.pixels()[i] == 1);
        }
    }
    img
}

/// Iterative generation state. [`run_pipeline`] drives it to completion;
/// stepping by hand allows stopping after any round.
pub struct Pipeline<'a> {
    rules: &'a RuleSet,
    cfg: &'a GenerationConfig,
    backend: &'a dyn VariationBackend,
    exec: &'a Executor,
    library: PatternLibrary,
    starters: SnapshotStats,
    series: Vec<IterationStats>,
}

impl<'a> Pipeline<'a> {
    pub fn new(
        starters: &[PatternGrid],
        rules: &'a RuleSet,
        cfg: &'a GenerationConfig,
        backend: &'a dyn VariationBackend,
        exec: &'a Executor,
    ) -> Result<Self> {
        cfg.validate()?;
        rules.validate()?;
        if starters.is_empty() {
            return Err(Error::InvalidInput("no starter patterns".into()));
        }
        let mut library = PatternLibrary::new();
        for (i, g) in starters.iter().enumerate() {
            if !drc::is_legal(g, rules)? {
                return Err(Error::InvalidInput(format!("starter {i} violates the rules")));
            }
            library.insert(g.clone(), Provenance::starter("starter"));
        }
        let mut p = Self {
            rules,
            cfg,
            backend,
            exec,
            library,
            starters: SnapshotStats {
                unique: 0,
                h1: 0.0,
                h2: 0.0,
                mean_density: 0.0,
                silhouette: None,
            },
            series: Vec::new(),
        };
        p.starters = p.snapshot(0)?;
        Ok(p)
    }

    pub fn library(&self) -> &PatternLibrary {
        &self.library
    }

    pub fn series(&self) -> &[IterationStats] {
        &self.series
    }

    pub fn starter_stats(&self) -> &SnapshotStats {
        &self.starters
    }

    /// Rounds run so far.
    pub fn completed(&self) -> usize {
        self.series.len()
    }

    fn snapshot(&self, iteration: usize) -> Result<SnapshotStats> {
        let lib = &self.library;
        let silhouette = match self.cfg.silhouette_k {
            Some(k) if k < lib.len() => Some(silhouette(
                lib,
                k,
                derive_seed(self.cfg.seed, &[TAG_SILHOUETTE, iteration as u64]),
            )?),
            _ => None,
        };
        Ok(SnapshotStats {
            unique: lib.len(),
            h1: h1(lib)?,
            h2: h2(lib)?,
            mean_density: lib.entries().iter().map(|e| density(&e.grid)).sum::<f64>() / lib.len() as f64,
            silhouette,
        })
    }

    fn job(&self, iteration: usize, parent: usize, mask: MaskSpec) -> Job {
        let g = &self.library.entries()[parent].grid;
        let seed = derive_seed(
            self.cfg.seed,
            &[TAG_JOB, iteration as u64, hash_prefix(g), set_code(mask.set_id), mask.index as u64],
        );
        Job { parent, mask, seed }
    }

    fn plan(&self, iteration: usize) -> Result<(usize, Vec<Job>)> {
        let mut jobs = Vec::new();
        if iteration == 0 {
            let starters: Vec<usize> = (0..self.library.len()).collect();
            for &id in &starters {
                let g = &self.library.entries()[id].grid;
                for m in all_builtin_masks(g.width(), g.height())? {
                    jobs.push(self.job(0, id, m));
                }
            }
            return Ok((starters.len(), jobs));
        }
        let eligible = self
            .library
            .entries()
            .iter()
            .filter(|e| density(&e.grid) >= self.cfg.min_density)
            .count();
        if eligible == 0 {
            return Ok((0, jobs));
        }
        let sel = SelectionConfig {
            k: self.cfg.k_select.min(eligible),
            ev_threshold: 0.9,
            min_density: self.cfg.min_density,
            seed: derive_seed(self.cfg.seed, &[TAG_SELECT, iteration as u64]),
        };
        let parents = select_representatives(&self.library, &sel, self.exec)?;
        let set = set_for_iteration(iteration);
        for &id in &parents {
            let e = &self.library.entries()[id];
            let set_masks = builtin_mask_set(set, e.grid.width(), e.grid.height())?;
            // The schedule continues from the lineage's last mask when it was
            // drawn from the same family.
            let last = e
                .provenance
                .mask
                .as_ref()
                .filter(|m| m.set_id == set)
                .map(|m| m.index);
            for idx in next_mask_indices(last, self.cfg.masks_per_pattern) {
                jobs.push(self.job(iteration, id, set_masks[idx].clone()));
            }
        }
        Ok((parents.len(), jobs))
    }

    fn execute(&self, job: &Job) -> Result<JobResult> {
        let parent = &self.library.entries()[job.parent].grid;
        let req = BackendRequest {
            id: job.seed,
            pattern: parent.clone(),
            mask: job.mask.clone(),
            num_variations: self.cfg.variations_per_mask,
            seed: job.seed,
        };
        let variations = match self.backend.vary(&req).or_else(|_| self.backend.vary(&req)) {
            Ok(v) => v,
            Err(_) => {
                return Ok(JobResult {
                    failed: true,
                    ..Default::default()
                })
            }
        };
        let mut out = JobResult::default();
        // Missing variations count as rejected; extras are ignored.
        out.rejected += self.cfg.variations_per_mask.saturating_sub(variations.len());
        for (v, g) in variations.iter().take(self.cfg.variations_per_mask).enumerate() {
            if !check_variation(parent, &job.mask, g).is_accept() {
                out.rejected += 1;
                continue;
            }
            let d = restore_known(
                parent,
                &job.mask,
                denoise(
                    g,
                    parent,
                    self.cfg.denoise_threshold,
                    derive_seed(job.seed, &[TAG_DENOISE, v as u64]),
                )?,
            );
            if drc::is_legal(&d, self.rules)? {
                out.legal_count += 1;
                if !self.library.contains(&d) {
                    out.legal.push(d);
                }
            }
        }
        Ok(out)
    }

    /// Runs the next round and returns its statistics.
    pub fn step(&mut self) -> Result<&IterationStats> {
        let iteration = self.series.len();
        let (parents, jobs) = self.plan(iteration)?;
        let results = self.exec.map(&jobs, |j| self.execute(j));
        let mut stats = IterationStats {
            iteration,
            parents,
            attempted: jobs.len() * self.cfg.variations_per_mask,
            rejected: 0,
            backend_failures: 0,
            legal: 0,
            success_rate: 0.0,
            inserted: 0,
            library: self.starters.clone(),
        };
        // Single serialized section: insert in (parent, mask, variation) order.
        for (job, res) in jobs.iter().zip(results) {
            let res = res?;
            stats.rejected += res.rejected;
            stats.backend_failures += res.failed as usize;
            stats.legal += res.legal_count;
            for g in res.legal {
                let prov = Provenance {
                    iteration: iteration as u32,
                    parent_id: Some(job.parent),
                    mask: Some(job.mask.clone()),
                    backend: self.backend.name().to_string(),
                };
                if self.library.insert(g, prov).is_new() {
                    stats.inserted += 1;
                }
            }
        }
        if stats.attempted > 0 {
            stats.success_rate = stats.legal as f64 / stats.attempted as f64;
        }
        stats.library = self.snapshot(iteration)?;
        self.series.push(stats);
        Ok(self.series.last().expect("just pushed"))
    }

    pub fn finish(self) -> PipelineOutput {
        PipelineOutput {
            library: self.library,
            starters: self.starters,
            series: self.series,
        }
    }
}

/// Initial round plus `cfg.iterations` selection rounds.
pub fn run_pipeline(
    starters: &[PatternGrid],
    rules: &RuleSet,
    cfg: &GenerationConfig,
    backend: &dyn VariationBackend,
    exec: &Executor,
) -> Result<PipelineOutput> {
    let mut p = Pipeline::new(starters, rules, cfg, backend, exec)?;
    for _ in 0..=cfg.iterations {
        p.step()?;
    }
    Ok(p.finish())
}

/// Legality of stochastic variations with and without template denoising.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenoiseAblation {
    pub samples: usize,
    pub raw_legal: usize,
    pub denoised_legal: usize,
    pub raw_rate: f64,
    pub denoised_rate: f64,
    pub mean_raw_noise: f64,
    /// Denoiser outputs with a noise level of exactly zero, measured before
    /// the known pixels are restored.
    pub zero_noise_after: usize,
}

impl DenoiseAblation {
    /// `denoised_rate / raw_rate`; infinite when nothing raw is legal.
    pub fn gain(&self) -> f64 {
        if self.raw_legal == 0 {
            if self.denoised_legal == 0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            self.denoised_rate / self.raw_rate
        }
    }
}

/// Sample `i` varies parent `i mod P` under built-in mask `(i / P) mod 10`.
pub fn denoise_ablation(
    parents: &[PatternGrid],
    rules: &RuleSet,
    params: &StochasticParams,
    samples: usize,
    threshold: usize,
    seed: u64,
    exec: &Executor,
) -> Result<DenoiseAblation> {
    if parents.is_empty() || samples == 0 {
        return Err(Error::InvalidInput("need parents and at least one sample".into()));
    }
    let masks: Vec<Vec<MaskSpec>> = parents
        .iter()
        .map(|g| all_builtin_masks(g.width(), g.height()))
        .collect::<Result<_>>()?;
    let rows = exec.map_range(samples, |i| -> Result<(bool, bool, f64, bool)> {
        let p = i % parents.len();
        let m = &masks[p][(i / parents.len()) % masks[p].len()];
        let s = derive_seed(seed, &[i as u64]);
        let raw = stochastic_vary(&parents[p], m, 1, s, params)?.remove(0);
        let den = denoise(&raw, &parents[p], threshold, derive_seed(s, &[TAG_DENOISE]))?;
        let clean = noise_level(&den) == 0.0;
        let den = restore_known(&parents[p], m, den);
        Ok((
            drc::is_legal(&raw, rules)?,
            drc::is_legal(&den, rules)?,
            noise_level(&raw),
            clean,
        ))
    });
    let mut out = DenoiseAblation {
        samples,
        raw_legal: 0,
        denoised_legal: 0,
        raw_rate: 0.0,
        denoised_rate: 0.0,
        mean_raw_noise: 0.0,
        zero_noise_after: 0,
    };
    for r in rows {
        let (raw, den, noise, clean) = r?;
        out.raw_legal += raw as usize;
        out.denoised_legal += den as usize;
        out.mean_raw_noise += noise;
        out.zero_noise_after += clean as usize;
    }
    out.raw_rate = out.raw_legal as f64 / samples as f64;
    out.denoised_rate = out.denoised_legal as f64 / samples as f64;
    out.mean_raw_noise /= samples as f64;
    Ok(out)
}
