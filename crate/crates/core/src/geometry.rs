//! Axis-aligned boxes and per-frame instance trajectories.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Corner-form box in continuous pixel coordinates. Area is
/// `(x2 − x1)·(y2 − y1)`, no `+1` correction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl TryFrom<[f64; 4]> for BBox {
    type Error = Error;

    fn try_from(v: [f64; 4]) -> Result<Self> {
        BBox::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.x1, b.y1, b.x2, b.y2]
    }
}

impl BBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self> {
        let b = BBox { x1, y1, x2, y2 };
        if [x1, y1, x2, y2].iter().all(|v| v.is_finite()) && x1 <= x2 && y1 <= y2 {
            Ok(b)
        } else {
            Err(Error::InvalidBox([x1, y1, x2, y2]))
        }
    }

    pub fn whole_image(width: f64, height: f64) -> Self {
        BBox {
            x1: 0.0,
            y1: 0.0,
            x2: width,
            y2: height,
        }
    }

    #[inline]
    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    #[inline]
    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    #[inline]
    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0)
    }

    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        x >= self.x1 && x <= self.x2 && y >= self.y1 && y <= self.y2
    }

    /// Clip to `[0, width] × [0, height]`.
    pub fn clip(&self, width: f64, height: f64) -> BBox {
        let x1 = self.x1.clamp(0.0, width);
        let y1 = self.y1.clamp(0.0, height);
        BBox {
            x1,
            y1,
            x2: self.x2.clamp(x1, width),
            y2: self.y2.clamp(y1, height),
        }
    }

    pub fn is_within(&self, width: f64, height: f64) -> bool {
        self.x1 >= 0.0 && self.y1 >= 0.0 && self.x2 <= width && self.y2 <= height
    }

    pub fn to_array(self) -> [f64; 4] {
        self.into()
    }
}

/// Intersection over union; 0 whenever the union has zero area.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let iw = (a.x2.min(b.x2) - a.x1.max(b.x1)).max(0.0);
    let ih = (a.y2.min(b.y2) - a.y1.max(b.y1)).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Smallest box containing both.
pub fn union_box(a: &BBox, b: &BBox) -> BBox {
    BBox {
        x1: a.x1.min(b.x1),
        y1: a.y1.min(b.y1),
        x2: a.x2.max(b.x2),
        y2: a.y2.max(b.y2),
    }
}

pub const PERSON: &str = "person";

/// Boxes of one instance over a T-frame segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub instance_id: String,
    pub category: String,
    pub boxes: Vec<BBox>,
    pub valid: Vec<bool>,
}

impl Trajectory {
    /// All-invalid trajectory of length `len`.
    pub fn empty(instance_id: impl Into<String>, category: impl Into<String>, len: usize) -> Self {
        Trajectory {
            instance_id: instance_id.into(),
            category: category.into(),
            boxes: vec![BBox::whole_image(0.0, 0.0); len],
            valid: vec![false; len],
        }
    }

    pub fn from_boxes(
        instance_id: impl Into<String>,
        category: impl Into<String>,
        boxes: Vec<BBox>,
    ) -> Self {
        let n = boxes.len();
        Trajectory {
            instance_id: instance_id.into(),
            category: category.into(),
            boxes,
            valid: vec![true; n],
        }
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    pub fn set(&mut self, t: usize, b: BBox) {
        self.boxes[t] = b;
        self.valid[t] = true;
    }

    pub fn is_person(&self) -> bool {
        self.category == PERSON
    }

    pub fn is_filled(&self) -> bool {
        self.valid.iter().all(|&v| v)
    }

    /// Reverse along time.
    pub fn reversed(&self) -> Self {
        let mut r = self.clone();
        r.boxes.reverse();
        r.valid.reverse();
        r
    }
}

/// Replace every invalid entry with the whole-image box. When
/// `keyframe` is given and that entry is invalid the annotation is
/// treated as corrupt.
pub fn fill_trajectory(
    traj: &Trajectory,
    frame_w: f64,
    frame_h: f64,
    keyframe: Option<usize>,
) -> Result<Trajectory> {
    if !(frame_w > 0.0 && frame_h > 0.0) {
        return Err(Error::Config {
            field: "frame size".into(),
            reason: format!("{frame_w}×{frame_h} must be positive"),
        });
    }
    if traj.boxes.len() != traj.valid.len() {
        return Err(Error::Length {
            op: "fill_trajectory",
            expected: traj.boxes.len(),
            got: traj.valid.len(),
        });
    }
    if let Some(k) = keyframe {
        if !traj.valid.get(k).copied().unwrap_or(false) {
            return Err(Error::MissingKeyframeBox {
                instance_id: traj.instance_id.clone(),
            });
        }
    }
    let mut out = traj.clone();
    let whole = BBox::whole_image(frame_w, frame_h);
    for (b, v) in out.boxes.iter_mut().zip(out.valid.iter_mut()) {
        if !*v {
            *b = whole;
            *v = true;
        }
    }
    Ok(out)
}

/// A (human, object) pair of indices into a trajectory list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PairProposal {
    pub human_index: usize,
    pub object_index: usize,
}

/// All ordered pairs (human, other) with `human != other`, humans first by
/// index then objects by index: M × (N − 1) pairs.
pub fn pair_proposals(trajectories: &[Trajectory]) -> Vec<PairProposal> {
    let mut pairs = Vec::new();
    for (h, th) in trajectories.iter().enumerate() {
        if !th.is_person() {
            continue;
        }
        for o in 0..trajectories.len() {
            if o != h {
                pairs.push(PairProposal {
                    human_index: h,
                    object_index: o,
                });
            }
        }
    }
    pairs
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn b(x1: f64, y1: f64, x2: f64, y2: f64) -> BBox {
        BBox::new(x1, y1, x2, y2).unwrap()
    }

    #[test]
    fn iou_examples() {
        assert_eq!(iou(&b(0., 0., 4., 4.), &b(0., 0., 4., 4.)), 1.0);
        assert_eq!(iou(&b(0., 0., 1., 1.), &b(5., 5., 6., 6.)), 0.0);
        // inter 2, union 6
        assert_abs_diff_eq!(
            iou(&b(0., 0., 2., 2.), &b(1., 0., 3., 2.)),
            1.0 / 3.0,
            epsilon = 1e-15
        );
        assert_eq!(iou(&b(1., 1., 1., 1.), &b(1., 1., 1., 1.)), 0.0);
        assert_eq!(iou(&b(1., 1., 1., 3.), &b(0., 0., 4., 4.)), 0.0);
    }

    #[test]
    fn box_validation() {
        assert!(BBox::new(2.0, 0.0, 1.0, 1.0).is_err());
        assert!(BBox::new(0.0, 0.0, f64::INFINITY, 1.0).is_err());
        let parsed: std::result::Result<BBox, _> = serde_json::from_str("[3, 0, 1, 1]");
        assert!(parsed.is_err());
        let parsed: BBox = serde_json::from_str("[0, 0, 1.5, 1]").unwrap();
        assert_eq!(parsed, b(0., 0., 1.5, 1.));
    }

    #[test]
    fn union_examples() {
        let x = b(1., 2., 3., 4.);
        assert_eq!(union_box(&x, &x), x);
        assert_eq!(
            union_box(&b(0., 0., 1., 1.), &b(2., 2., 3., 3.)),
            b(0., 0., 3., 3.)
        );
        assert_eq!(
            union_box(&b(1., 1., 2., 2.), &b(0., 0., 5., 5.)),
            b(0., 0., 5., 5.)
        );
    }

    #[test]
    fn fill_examples() {
        let full = Trajectory::from_boxes("a", "cup", vec![b(1., 1., 2., 2.); 3]);
        assert_eq!(fill_trajectory(&full, 64., 64., Some(1)).unwrap(), full);

        let mut t = Trajectory::empty("a", "cup", 3);
        t.set(1, b(4., 4., 9., 9.));
        let f = fill_trajectory(&t, 64., 64., Some(1)).unwrap();
        assert_eq!(f.boxes[0], b(0., 0., 64., 64.));
        assert_eq!(f.boxes[1], b(4., 4., 9., 9.));
        assert_eq!(f.boxes[2], b(0., 0., 64., 64.));
        assert!(f.is_filled());

        let empty = Trajectory::empty("a", "cup", 4);
        let f = fill_trajectory(&empty, 32., 16., None).unwrap();
        assert!(f.boxes.iter().all(|x| *x == b(0., 0., 32., 16.)));
        assert!(matches!(
            fill_trajectory(&empty, 32., 16., Some(2)),
            Err(Error::MissingKeyframeBox { .. })
        ));
        assert!(fill_trajectory(&t, 0., 16., None).is_err());
    }

    #[test]
    fn pair_counts() {
        let person = |i: usize| Trajectory::from_boxes(i.to_string(), PERSON, vec![]);
        let obj = |i: usize| Trajectory::from_boxes(i.to_string(), "cup", vec![]);
        assert_eq!(pair_proposals(&[person(0), obj(1)]).len(), 1);
        let trajs = [person(0), obj(1), person(2)];
        let pairs = pair_proposals(&trajs);
        assert_eq!(pairs.len(), 4);
        assert!(pairs
            .iter()
            .all(|p| p.human_index != p.object_index && trajs[p.human_index].is_person()));
    }

    fn arb_box() -> impl Strategy<Value = BBox> {
        (0.0..50.0f64, 0.0..50.0f64, 0.0..30.0f64, 0.0..30.0f64)
            .prop_map(|(x, y, w, h)| BBox::new(x, y, x + w, y + h).unwrap())
    }

    fn arb_traj() -> impl Strategy<Value = Trajectory> {
        proptest::collection::vec((arb_box(), any::<bool>()), 1..10).prop_map(|v| Trajectory {
            instance_id: "i".into(),
            category: "cup".into(),
            boxes: v.iter().map(|x| x.0).collect(),
            valid: v.iter().map(|x| x.1).collect(),
        })
    }

    proptest! {
        #[test]
        fn iou_symmetric_and_bounded(a in arb_box(), c in arb_box()) {
            let x = iou(&a, &c);
            prop_assert_eq!(x, iou(&c, &a));
            prop_assert!((0.0..=1.0).contains(&x));
        }

        #[test]
        fn iou_one_iff_same_region(a in arb_box(), c in arb_box()) {
            prop_assume!(a.area() > 0.0 && c.area() > 0.0);
            prop_assert_eq!(iou(&a, &a), 1.0);
            if iou(&a, &c) == 1.0 {
                prop_assert_eq!(a, c);
            }
        }

        #[test]
        fn union_laws(a in arb_box(), c in arb_box(), d in arb_box()) {
            prop_assert_eq!(union_box(&a, &c), union_box(&c, &a));
            prop_assert_eq!(union_box(&union_box(&a, &c), &d), union_box(&a, &union_box(&c, &d)));
            prop_assert_eq!(union_box(&a, &a), a);
        }

        #[test]
        fn fill_idempotent(t in arb_traj()) {
            let once = fill_trajectory(&t, 80.0, 80.0, None).unwrap();
            prop_assert!(once.is_filled());
            let twice = fill_trajectory(&once, 80.0, 80.0, None).unwrap();
            prop_assert_eq!(&once, &twice);
            for i in 0..t.len() {
                if t.valid[i] {
                    prop_assert_eq!(once.boxes[i], t.boxes[i]);
                }
            }
        }
    }
}
