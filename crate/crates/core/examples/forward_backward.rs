// Forward pass, input and parameter gradients, and the model text format.

use fairadv::model::{ce_logit_grad, Activation, LossKind, MlpModel};
use ndarray::array;

pub fn run_example() -> fairadv::Result<()> {
    let model = MlpModel::new_seeded(&[3, 8, 4, 1], Activation::Relu, 42)?;
    let x = array![[0.1, 0.7, 0.3], [0.9, 0.2, 0.5]];
    let y = array![1.0, 0.0];

    let trace = model.forward(x.view())?;
    let soft = trace.soft_labels().to_owned();
    println!("soft labels: {soft:.4}");

    let grads = model.backward_loss(&trace, LossKind::CrossEntropy, y.view())?;
    println!("d CE / dx:\n{:.5}", grads.input_grad);

    // central differences on the first input coordinate
    let h = 1e-6;
    let loss = |x: &ndarray::Array2<f64>| -> fairadv::Result<f64> {
        let f = model.predict(x.view())?;
        Ok(f.iter().zip(&y).map(|(&f, &y)| fairadv::model::cross_entropy(f, y)).sum())
    };
    let (mut up, mut down) = (x.clone(), x.clone());
    up[[0, 0]] += h;
    down[[0, 0]] -= h;
    let fd = (loss(&up)? - loss(&down)?) / (2.0 * h);
    println!("analytic {:.8} vs finite difference {:.8}", grads.input_grad[[0, 0]], fd);

    let stepped = model.sgd_step(&grads, 0.5)?;
    let same = model.input_gradient(&trace, ce_logit_grad(soft.view(), y.view()).view())?;
    assert_eq!(same, grads.input_grad);
    println!("loss before {:.6}, after one step {:.6}", loss(&x)?, {
        let f = stepped.predict(x.view())?;
        f.iter().zip(&y).map(|(&f, &y)| fairadv::model::cross_entropy(f, y)).sum::<f64>()
    });

    let text = model.to_text();
    assert_eq!(MlpModel::from_text(&text)?, model);
    println!("{} parameters, text form {} bytes", model.parameter_count(), text.len());
    Ok(())
}

#[allow(dead_code)]
fn main() -> fairadv::Result<()> {
    run_example()
}
