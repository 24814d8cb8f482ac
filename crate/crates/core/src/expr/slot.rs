use std::fmt;

/// Problem constants that may appear by name in any expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Param {
    A,
    B,
    Tau,
}

/// Identity of a variable an expression may reference.
///
/// Components are zero-based here and one-based in the textual form
/// (`x1_2` is `State { order: 1, comp: 1 }`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SlotId {
    /// `t`
    Time,
    /// `x{k}_{j}`: k-th derivative of x at t.
    State { order: usize, comp: usize },
    /// `xt{k}_{j}`: k-th derivative of x at t - tau.
    Delayed { order: usize, comp: usize },
    /// `z`
    Z,
    /// `p{I}_{J}`: I-th derivative of the gauge function.
    Gauge { order: usize, comp: usize },
    /// `p_at_a_{J}`: gauge function frozen at t = a.
    GaugeAtA { comp: usize },
    /// `p_at_b_{J}`: gauge function frozen at t = b.
    GaugeAtB { comp: usize },
    /// `z_b`: terminal value z(b) of the pair under evaluation.
    TerminalZ,
    /// `a`, `b`, `tau`
    Param(Param),
}

impl SlotId {
    pub fn state(order: usize, comp: usize) -> Self {
        SlotId::State { order, comp }
    }

    pub fn delayed(order: usize, comp: usize) -> Self {
        SlotId::Delayed { order, comp }
    }

    pub fn gauge(order: usize, comp: usize) -> Self {
        SlotId::Gauge { order, comp }
    }

    pub fn is_gauge(&self) -> bool {
        matches!(self, SlotId::Gauge { .. })
    }

    /// Slots held constant under total time differentiation.
    pub fn is_frozen(&self) -> bool {
        matches!(
            self,
            SlotId::GaugeAtA { .. }
                | SlotId::GaugeAtB { .. }
                | SlotId::TerminalZ
                | SlotId::Param(_)
        )
    }
}

impl fmt::Display for SlotId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            SlotId::Time => write!(f, "t"),
            SlotId::State { order, comp } => write!(f, "x{}_{}", order, comp + 1),
            SlotId::Delayed { order, comp } => write!(f, "xt{}_{}", order, comp + 1),
            SlotId::Z => write!(f, "z"),
            SlotId::Gauge { order, comp } => write!(f, "p{}_{}", order, comp + 1),
            SlotId::GaugeAtA { comp } => write!(f, "p_at_a_{}", comp + 1),
            SlotId::GaugeAtB { comp } => write!(f, "p_at_b_{}", comp + 1),
            SlotId::TerminalZ => write!(f, "z_b"),
            SlotId::Param(Param::A) => write!(f, "a"),
            SlotId::Param(Param::B) => write!(f, "b"),
            SlotId::Param(Param::Tau) => write!(f, "tau"),
        }
    }
}

/// Which slots a parsed expression may reference, and their ranges.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Vocabulary {
    /// Highest state-jet order.
    pub n: usize,
    /// State dimension.
    pub m: usize,
    /// Highest gauge-jet order.
    pub q: usize,
    /// Gauge dimension.
    pub d: usize,
    pub state: bool,
    pub z: bool,
    pub gauge: bool,
    pub frozen: bool,
}

impl Vocabulary {
    /// Time and problem constants only (history functions).
    pub fn history() -> Self {
        Vocabulary {
            n: 0,
            m: 1,
            q: 0,
            d: 1,
            state: false,
            z: false,
            gauge: false,
            frozen: false,
        }
    }

    pub fn lagrangian(n: usize, m: usize) -> Self {
        Vocabulary {
            n,
            m,
            state: true,
            z: true,
            ..Self::history()
        }
    }

    /// Arguments of a gauge transformation: time, jets, z and gauge jets.
    pub fn alpha(n: usize, m: usize, q: usize, d: usize) -> Self {
        Vocabulary {
            n,
            m,
            q,
            d,
            state: true,
            z: true,
            gauge: true,
            frozen: false,
        }
    }

    /// Vocabulary of the semi-invariance function F.
    pub fn gauge_function(n: usize, m: usize, q: usize, d: usize) -> Self {
        Vocabulary {
            frozen: true,
            ..Self::alpha(n, m, q, d)
        }
    }
}

/// Why a name failed to resolve.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NameError {
    Unknown,
    OrderOutOfRange { max: usize },
    ComponentOutOfRange { max: usize },
}

impl Vocabulary {
    pub fn resolve(&self, name: &str) -> Result<SlotId, NameError> {
        match name {
            "t" => return Ok(SlotId::Time),
            "a" => return Ok(SlotId::Param(Param::A)),
            "b" => return Ok(SlotId::Param(Param::B)),
            "tau" => return Ok(SlotId::Param(Param::Tau)),
            "z" if self.z => return Ok(SlotId::Z),
            "z_b" if self.frozen => return Ok(SlotId::TerminalZ),
            _ => {}
        }
        if self.frozen {
            for (prefix, at_a) in [("p_at_a", true), ("p_at_b", false)] {
                if let Some(rest) = name.strip_prefix(prefix) {
                    let comp = self.component(rest, self.d)?;
                    return Ok(if at_a {
                        SlotId::GaugeAtA { comp }
                    } else {
                        SlotId::GaugeAtB { comp }
                    });
                }
            }
        }
        // `xt` must be tried before `x`.
        if self.state {
            if let Some(rest) = name.strip_prefix("xt") {
                let (order, comp) = self.jet(rest, self.n, self.m)?;
                return Ok(SlotId::Delayed { order, comp });
            }
            if let Some(rest) = name.strip_prefix('x') {
                let (order, comp) = self.jet(rest, self.n, self.m)?;
                return Ok(SlotId::State { order, comp });
            }
        }
        if self.gauge {
            if let Some(rest) = name.strip_prefix('p') {
                let (order, comp) = self.jet(rest, self.q, self.d)?;
                return Ok(SlotId::Gauge { order, comp });
            }
        }
        Err(NameError::Unknown)
    }

    fn jet(&self, rest: &str, max_order: usize, dim: usize) -> Result<(usize, usize), NameError> {
        let (order_text, comp_text) = match rest.split_once('_') {
            Some((o, c)) => (o, Some(c)),
            None => (rest, None),
        };
        let order = parse_index(order_text)?;
        if order > max_order {
            return Err(NameError::OrderOutOfRange { max: max_order });
        }
        let comp = match comp_text {
            Some(c) => one_based(c, dim)?,
            None if dim == 1 => 0,
            None => return Err(NameError::Unknown),
        };
        Ok((order, comp))
    }

    fn component(&self, rest: &str, dim: usize) -> Result<usize, NameError> {
        if rest.is_empty() {
            return if dim == 1 {
                Ok(0)
            } else {
                Err(NameError::Unknown)
            };
        }
        match rest.strip_prefix('_') {
            Some(c) => one_based(c, dim),
            None => Err(NameError::Unknown),
        }
    }
}

fn parse_index(text: &str) -> Result<usize, NameError> {
    if text.is_empty() || !text.bytes().all(|b| b.is_ascii_digit()) {
        return Err(NameError::Unknown);
    }
    text.parse().map_err(|_| NameError::Unknown)
}

fn one_based(text: &str, dim: usize) -> Result<usize, NameError> {
    let j = parse_index(text)?;
    if j == 0 || j > dim {
        return Err(NameError::ComponentOutOfRange { max: dim });
    }
    Ok(j - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip_through_display() {
        let vocab = Vocabulary::gauge_function(2, 2, 1, 2);
        let slots = [
            SlotId::Time,
            SlotId::state(2, 1),
            SlotId::delayed(0, 0),
            SlotId::Z,
            SlotId::gauge(1, 1),
            SlotId::GaugeAtA { comp: 0 },
            SlotId::GaugeAtB { comp: 1 },
            SlotId::TerminalZ,
            SlotId::Param(Param::Tau),
        ];
        for slot in slots {
            assert_eq!(vocab.resolve(&slot.to_string()), Ok(slot));
        }
    }

    #[test]
    fn suffix_optional_in_one_dimension() {
        let vocab = Vocabulary::lagrangian(1, 1);
        assert_eq!(vocab.resolve("xt0"), Ok(SlotId::delayed(0, 0)));
        assert_eq!(vocab.resolve("xt0_1"), Ok(SlotId::delayed(0, 0)));
        let vocab2 = Vocabulary::lagrangian(1, 2);
        assert_eq!(vocab2.resolve("x0"), Err(NameError::Unknown));
    }

    #[test]
    fn range_violations() {
        let vocab = Vocabulary::lagrangian(1, 1);
        assert_eq!(
            vocab.resolve("x2"),
            Err(NameError::OrderOutOfRange { max: 1 })
        );
        assert_eq!(
            vocab.resolve("x0_2"),
            Err(NameError::ComponentOutOfRange { max: 1 })
        );
        assert_eq!(vocab.resolve("p0"), Err(NameError::Unknown));
        assert_eq!(vocab.resolve("y"), Err(NameError::Unknown));
    }
}
