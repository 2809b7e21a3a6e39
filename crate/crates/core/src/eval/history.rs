use super::pipeline::fmt_num;
use crate::training::TrainHistory;

/// One row per step; `val_nl2` is filled on the last step of each epoch and
/// `loss_d` is empty when the critic was not updated.
pub fn history_csv(h: &TrainHistory) -> String {
    let mut out = String::from("step,loss_d,loss_g_total,loss_g_sup,loss_g_adv,loss_g_mass,epoch,val_nl2\n");
    for (k, s) in h.steps.iter().enumerate() {
        let last_of_epoch = h.steps.get(k + 1).is_none_or(|n| n.epoch != s.epoch);
        let val = match (last_of_epoch, h.val_nl2.get(s.epoch)) {
            (true, Some(v)) => fmt_num(*v),
            _ => String::new(),
        };
        let cells = [
            s.step.to_string(),
            s.loss_d.map(fmt_num).unwrap_or_default(),
            fmt_num(s.loss_g_total),
            fmt_num(s.loss_g_sup),
            fmt_num(s.loss_g_adv),
            fmt_num(s.loss_g_mass),
            s.epoch.to_string(),
            val,
        ];
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}
