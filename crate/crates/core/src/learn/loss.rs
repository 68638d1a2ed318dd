/// `log(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Alpha-balanced focal loss of one prediction:
/// `-a y (1-p)^g log p - (1-a)(1-y) p^g log(1-p)`.
pub fn focal_loss(p: f64, y: u8, alpha: f64, gamma: f64) -> f64 {
    if y == 1 {
        -alpha * (1.0 - p).powf(gamma) * p.ln()
    } else {
        -(1.0 - alpha) * p.powf(gamma) * (1.0 - p).ln()
    }
}

/// Focal loss and its derivative with respect to the logit `z`, `p = sigmoid(z)`.
pub fn focal_loss_logit(z: f64, y: u8, alpha: f64, gamma: f64) -> (f64, f64) {
    let p = sigmoid(z);
    let q = sigmoid(-z);
    // log p = -softplus(-z), log(1-p) = -softplus(z)
    if y == 1 {
        let log_p = -softplus(-z);
        let loss = -alpha * q.powf(gamma) * log_p;
        let grad = alpha * (gamma * p * q.powf(gamma) * log_p - q.powf(gamma + 1.0));
        (loss, grad)
    } else {
        let log_q = -softplus(z);
        let loss = -(1.0 - alpha) * p.powf(gamma) * log_q;
        let grad = (1.0 - alpha) * (p.powf(gamma + 1.0) - gamma * p.powf(gamma) * q * log_q);
        (loss, grad)
    }
}

/// Batch-mean weighted binary cross-entropy:
/// `-w y log p - (1-y) log(1-p)`.
pub fn weighted_bce(p: &[f64], y: &[u8], w_pos: f64) -> f64 {
    assert_eq!(p.len(), y.len());
    let total: f64 = p
        .iter()
        .zip(y)
        .map(|(&p, &y)| if y == 1 { -w_pos * p.ln() } else { -(1.0 - p).ln() })
        .sum();
    total / p.len() as f64
}

/// Weighted BCE of one logit and its derivative: `w (p - 1)` for positives,
/// `p` for negatives.
pub fn weighted_bce_logit(z: f64, y: u8, w_pos: f64) -> (f64, f64) {
    if y == 1 {
        (w_pos * softplus(-z), w_pos * (sigmoid(z) - 1.0))
    } else {
        (softplus(z), sigmoid(z))
    }
}
