//! Parse a Lagrangian, differentiate it symbolically and evaluate at a point.
use herglotz::expr::{parse, SlotId, Vocabulary};

fn main() {
    let vocab = Vocabulary::lagrangian(1, 1);
    let l = parse("x1^2/2 - x0^2/2 + sin(xt0)*z", &vocab).expect("valid Lagrangian");
    let point = |s: SlotId| match s {
        SlotId::Time => Some(0.5),
        SlotId::State { order: 0, .. } => Some(0.3),
        SlotId::State { order: 1, .. } => Some(-1.2),
        SlotId::Delayed { order: 0, .. } => Some(0.8),
        SlotId::Z => Some(2.0),
        _ => None,
    };
    println!("L = {l}");
    println!("L(point) = {:?}", l.eval(&point).unwrap());
    let slots = [
        ("x0", SlotId::state(0, 0)),
        ("x1", SlotId::state(1, 0)),
        ("xt0", SlotId::delayed(0, 0)),
        ("z", SlotId::Z),
    ];
    for (name, slot) in slots {
        let d = l.differentiate(slot).simplify();
        println!("dL/d{name} = {d}  ->  {:?}", d.eval(&point).unwrap());
    }
}
