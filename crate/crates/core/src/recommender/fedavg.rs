use super::ModelParams;
use crate::error::{Error, Result};

/// Elementwise arithmetic mean of same-shape models.
///
/// Each element is summed in ascending value order, so the result is
/// bitwise independent of the order of `models`. All models must carry the
/// same input scaler; it is copied, not averaged.
pub fn fedavg(models: &[ModelParams]) -> Result<ModelParams> {
    let first = models.first().ok_or(Error::Empty("model list"))?;
    for (i, m) in models.iter().enumerate().skip(1) {
        if !m.same_shape(first) {
            return Err(Error::ShapeMismatch(format!(
                "model {i} has widths {:?}, expected {:?}",
                m.dims(),
                first.dims()
            )));
        }
        if m.scaler != first.scaler {
            return Err(Error::ShapeMismatch(format!(
                "model {i} was trained with a different feature scaler"
            )));
        }
    }
    if models.len() == 1 {
        return Ok(first.clone());
    }
    let n = models.len() as f64;
    let mut out = first.clone();
    let mut iters: Vec<_> = models.iter().map(|m| m.values()).collect();
    let mut column = Vec::with_capacity(models.len());
    for slot in out.values_mut() {
        column.clear();
        column.extend(iters.iter_mut().map(|it| *it.next().expect("same shape")));
        column.sort_unstable_by(f64::total_cmp);
        *slot = column.iter().sum::<f64>() / n;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recommender::{FeatureScaler, ModelConfig};
    use crate::rng::seeded;

    fn model(seed: u64) -> ModelParams {
        ModelParams::init(
            &ModelConfig::default(),
            FeatureScaler::identity(5),
            &mut seeded(seed),
        )
        .unwrap()
    }

    fn negated(m: &ModelParams) -> ModelParams {
        let mut n = m.clone();
        n.values_mut().for_each(|v| *v = -*v);
        n
    }

    #[test]
    fn single_model_identity() {
        let w = model(1);
        assert_eq!(fedavg(std::slice::from_ref(&w)).unwrap(), w);
    }

    #[test]
    fn opposite_models_cancel() {
        let w = model(2);
        let avg = fedavg(&[w.clone(), negated(&w)]).unwrap();
        assert!(avg.values().all(|v| *v == 0.0));
    }

    #[test]
    fn mean_of_one_weight() {
        let mut ms = vec![model(3), model(3), model(3)];
        for (m, v) in ms.iter_mut().zip([1.0, 2.0, 6.0]) {
            m.layers[1].weights[7] = v;
        }
        assert_eq!(fedavg(&ms).unwrap().layers[1].weights[7], 3.0);
    }

    #[test]
    fn errors() {
        assert!(matches!(fedavg(&[]), Err(Error::Empty(_))));
        let cfg = ModelConfig {
            embed_dim: 4,
            ..ModelConfig::default()
        };
        let other = ModelParams::init(&cfg, FeatureScaler::identity(5), &mut seeded(0)).unwrap();
        assert!(matches!(
            fedavg(&[model(1), other]),
            Err(Error::ShapeMismatch(_))
        ));
        let mut rescaled = model(1);
        rescaled.scaler.max[0] = 9.0;
        assert!(fedavg(&[model(1), rescaled]).is_err());
    }
}
