use radisynth_core::geom::Vec3;
use radisynth_core::scene::{
    generate_fml_stack, generate_pore_plate, glare_layers, Layer, Material, PoreCount, PorePlateParams, Range,
};

use super::{values, Ctx};
use crate::artifacts::commit_spec;
use crate::cli::{GenFmlArgs, GenPlateArgs};
use crate::error::{Error, Result};

/// `aluminum`, `prepreg`, `steel`, `air` (or `al`, `pp`), or `name=mu`.
pub fn parse_material(s: &str) -> Result<Material> {
    let s = s.trim();
    if let Some((name, mu)) = s.split_once('=') {
        let mu: f64 = mu
            .trim()
            .parse()
            .map_err(|_| Error::Validation(format!("bad attenuation in material '{s}'")))?;
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(Error::Validation(format!("material '{s}' needs a finite mu >= 0")));
        }
        return Ok(Material::new(name.trim(), mu));
    }
    match s.to_ascii_lowercase().as_str() {
        "aluminum" | "aluminium" | "al" => Ok(Material::aluminum()),
        "prepreg" | "pp" => Ok(Material::prepreg()),
        "steel" => Ok(Material::steel()),
        "air" => Ok(Material::air()),
        _ => Err(Error::Validation(format!(
            "unknown material '{s}' (use aluminum, prepreg, steel, air or name=mu)"
        ))),
    }
}

/// Comma-separated `material:thickness` list, bottom layer first.
pub fn parse_layers(s: &str) -> Result<Vec<Layer>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|part| {
            let (m, t) = part
                .rsplit_once(':')
                .ok_or_else(|| Error::Validation(format!("layer '{part}' is not material:thickness")))?;
            let thickness: f64 = t
                .trim()
                .parse()
                .map_err(|_| Error::Validation(format!("bad thickness in layer '{part}'")))?;
            Ok(Layer {
                material: parse_material(m)?,
                thickness,
            })
        })
        .collect()
}

pub(crate) fn layers_or_default(s: Option<&str>) -> Result<Vec<Layer>> {
    match s {
        Some(s) => parse_layers(s),
        None => Ok(glare_layers()),
    }
}

pub(crate) fn plate_params(a: &GenPlateArgs) -> Result<PorePlateParams> {
    let count = match a.pores {
        Some(n) => PoreCount::Fixed(n),
        None => PoreCount::Poisson { lambda: a.lambda },
    };
    let [x, y, z] = values(&a.size, "size")?;
    let [lo, hi] = values(&a.scale, "scale")?;
    Ok(PorePlateParams {
        size: Vec3::new(x, y, z),
        count,
        base_radius: Range::fixed(a.radius),
        scale: Range::new(lo, hi),
        margin: a.margin,
        segments: a.segments,
        ..Default::default()
    })
}

pub fn gen_plate(ctx: &mut Ctx, a: &GenPlateArgs) -> Result<String> {
    let params = plate_params(a)?;
    let spec = generate_pore_plate(&params, ctx.stream("spec"))?;
    log::info!("generated plate with {} pores", spec.defects.len());
    commit_spec(ctx.ws, &ctx.run, &spec, a.ascii_stl)
}

pub fn gen_fml(ctx: &mut Ctx, a: &GenFmlArgs) -> Result<String> {
    let layers = layers_or_default(a.layers.as_deref())?;
    let spec = generate_fml_stack(values(&a.footprint, "footprint")?, &layers)?;
    commit_spec(ctx.ws, &ctx.run, &spec, a.ascii_stl)
}
