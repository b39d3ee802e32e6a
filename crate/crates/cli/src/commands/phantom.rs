use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anatoview_core::volume::{generate_phantom, save_volume, LabelKey, PhantomSpec};

use crate::assets::{check_output_parent, hierarchy_path};
use crate::{CliError, CliResult};

pub struct PhantomArgs {
    /// Preset name or path to a JSON phantom spec.
    pub input: String,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub downsample: usize,
}

pub struct PhantomSummary {
    pub dims: [usize; 3],
    pub histogram: BTreeMap<LabelKey, usize>,
    pub names: BTreeMap<LabelKey, String>,
}

fn load_spec(input: &str) -> CliResult<PhantomSpec> {
    let path = Path::new(input);
    if path.is_file() {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("reading {input}: {e}")))?;
        return PhantomSpec::from_json(&text).map_err(|e| CliError::usage(format!("{input}: {e}")));
    }
    PhantomSpec::preset(input).ok_or_else(|| {
        CliError::usage(format!(
            "{input:?} is neither a spec file nor a preset ({})",
            PhantomSpec::preset_names().join(", ")
        ))
    })
}

pub fn run(args: &PhantomArgs) -> CliResult<PhantomSummary> {
    let mut spec = load_spec(&args.input)?;
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    if args.downsample == 0 {
        return Err(CliError::usage("--downsample must be at least 1"));
    }
    check_output_parent(&args.out)?;
    let hierarchy = spec
        .hierarchy()
        .map_err(|e| CliError::usage(format!("phantom spec: {e}")))?;
    let volume = generate_phantom(&spec)
        .map_err(|e| CliError::usage(format!("phantom spec: {e}")))?
        .downsample(args.downsample)
        .map_err(CliError::stage("downsample"))?;

    let unwritable = |e: anatoview_core::Error| {
        CliError::usage(format!("cannot write {}: {e}", args.out.display()))
    };
    save_volume(&volume, &args.out).map_err(unwritable)?;
    hierarchy.save(&hierarchy_path(&args.out)).map_err(unwritable)?;

    Ok(PhantomSummary {
        dims: volume.dims(),
        histogram: volume.organ_histogram(),
        names: hierarchy
            .entries()
            .iter()
            .map(|e| (e.key, e.name.clone()))
            .collect(),
    })
}
