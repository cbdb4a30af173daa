use rand::seq::SliceRandom;
use rand::Rng;

use crate::plant::{Apple, Workspace};

/// Draws `count` apples uniformly from the workspace, rejecting any
/// candidate closer than `min_separation` to the previously accepted one.
pub fn sample_apples<R: Rng + ?Sized>(workspace: &Workspace, count: usize, rng: &mut R) -> Vec<Apple> {
    let [x0, x1] = workspace.x_range;
    let [y0, y1] = workspace.y_range;
    let z = workspace.z_fixed;
    sample_with(workspace, count, || {
        Apple::new(rng.random_range(x0..=x1), rng.random_range(y0..=y1), z)
    })
}

pub(crate) fn sample_with(
    workspace: &Workspace,
    count: usize,
    mut candidate: impl FnMut() -> Apple,
) -> Vec<Apple> {
    let mut out: Vec<Apple> = Vec::with_capacity(count);
    while out.len() < count {
        let next = candidate();
        if let Some(prev) = out.last() {
            if prev.distance(&next) < workspace.min_separation {
                continue;
            }
        }
        out.push(next);
    }
    out
}

/// In-place Fisher-Yates shuffle for one epoch.
pub fn shuffle_apples<R: Rng + ?Sized>(apples: &mut [Apple], rng: &mut R) {
    apples.shuffle(rng);
}
