use alloc::string::String;
use alloc::vec;

use serde::{Deserialize, Serialize};

use super::{Intake, Persona, SectionMap, WorkflowConfig, WorkflowError, WorkflowRun, FOLLOW_UP_HEADINGS};
use crate::kernel::{AgentDef, Pipeline, Stage};
use crate::provider::Provider;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FollowUpPlan {
    pub sections: SectionMap,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CarePlanReport {
    pub persona: Persona,
    pub assessment: String,
    pub daily_plan: String,
    pub followup: FollowUpPlan,
}

impl CarePlanReport {
    pub fn to_markdown(&self) -> String {
        alloc::format!(
            "# Care Plan\n\n## Assessment\n{}\n\n## Daily Care Plan\n{}\n\n# Follow-up Plan\n\n{}",
            self.assessment.trim(),
            self.daily_plan.trim(),
            self.followup.sections.to_markdown()
        )
    }
}

const PIPELINE: [&str; 3] = ["assessment", "care-plan", "follow-up"];

const ASSESSMENT: &str = "You are the assessment agent of a dementia care support team. Read the intake and \
write a concise assessment: the person's situation, the main symptoms, the safety risks and what matters most \
to the person asking. Write for the persona named in the intake.";

const CARE_PLAN: &str = "You are the care plan agent. Using the intake and the assessment, write a safety-first \
daily care plan: morning, afternoon, evening and night routines, medication handling, home safety steps and \
support for the caregiver.";

const FOLLOW_UP: &str = "You are the follow-up agent. Using everything above, write a follow-up plan in Markdown \
with exactly these level-2 headings, in this order and with no others: ## Check-in Cadence, ## Tracking Template, \
## Escalation Criteria, ## Care Progression Planning, ## Resource Refresher. Put content under every heading.";

/// Check the follow-up output's headings and return them as a plan. The
/// first heading that is missing, out of place or unexpected is the offender.
pub fn validate_followup(markdown: &str) -> Result<FollowUpPlan, WorkflowError> {
    let sections = SectionMap::from_markdown(markdown);
    for (i, expected) in FOLLOW_UP_HEADINGS.iter().enumerate() {
        match sections.0.get(i) {
            Some((h, body)) if h == expected => {
                if body.trim().is_empty() {
                    return Err(WorkflowError::validation(*expected, "section is empty"));
                }
            }
            Some((h, _)) if FOLLOW_UP_HEADINGS.contains(&h.as_str()) => {
                return Err(WorkflowError::validation(*expected, "heading out of order"));
            }
            Some(_) | None => return Err(WorkflowError::validation(*expected, "heading missing")),
        }
    }
    if let Some((extra, _)) = sections.0.get(FOLLOW_UP_HEADINGS.len()) {
        return Err(WorkflowError::validation(extra.as_str(), "unexpected heading"));
    }
    Ok(FollowUpPlan { sections })
}

/// Assessment, then care plan, then follow-up; each agent sees every earlier output.
pub fn run_support_plan(intake: &Intake, provider: &dyn Provider, cfg: &WorkflowConfig) -> WorkflowRun<CarePlanReport> {
    if let Err(e) = intake.validate() {
        return WorkflowRun::rejected(&cfg.run_id, &PIPELINE, "intake", e);
    }
    let stages = vec![
        Stage::new(AgentDef::new("assessment", "assessment", ASSESSMENT), "Write the assessment."),
        Stage::new(AgentDef::new("care-plan", "care-plan", CARE_PLAN), "Write the daily care plan."),
        Stage::new(AgentDef::new("follow-up", "follow-up", FOLLOW_UP), "Write the follow-up plan."),
    ];
    let run = Pipeline::new(stages).run(&cfg.run_id, intake.to_context(), provider);
    let (transcript, context) = match run.into_result() {
        Ok(ok) => ok,
        Err((e, transcript)) => return WorkflowRun { transcript, result: Err(e.into()) },
    };
    let text = |id: &str| context.latest_from(id).map(|c| c.render()).unwrap_or_default();
    match validate_followup(&text("follow-up")) {
        Ok(followup) => {
            let report =
                CarePlanReport { persona: intake.persona, assessment: text("assessment"), daily_plan: text("care-plan"), followup };
            WorkflowRun { transcript, result: Ok(report) }
        }
        Err(e) => WorkflowRun::failed_check(transcript, "follow-up", e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::RunState;
    use crate::testutil::ByRole;

    pub(crate) const FOLLOW: &str = "## Check-in Cadence\nWeekly calls.\n## Tracking Template\n- sleep\n- meals\n\
## Escalation Criteria\nFalls or wandering.\n## Care Progression Planning\nReview in 3 months.\n\
## Resource Refresher\nalz.org helpline.\n";

    fn intake() -> Intake {
        let mut i = Intake::new(Persona::Caregiver, 78);
        i.primary_goal = "routine".into();
        i.medications = vec!["donepezil".into()];
        i
    }

    #[test]
    fn three_stage_handoff() {
        let p = ByRole::new(&[
            ("assessment", "Assessment: mild memory loss."),
            ("care-plan", "Daily plan with monthly medication reviews for donepezil."),
            ("follow-up", FOLLOW),
        ]);
        let run = run_support_plan(&intake(), &p, &WorkflowConfig::default());
        let report = run.result.unwrap();
        assert!(report.daily_plan.contains("medication reviews for donepezil"));
        assert_eq!(report.followup.sections.headings().collect::<alloc::vec::Vec<_>>(), FOLLOW_UP_HEADINGS);
        assert_eq!(run.transcript.status, RunState::Completed);
        let log = p.log.borrow();
        assert!(log[1].prompt_text().contains("Assessment: mild memory loss."));
        assert!(log[2].prompt_text().contains("Assessment: mild memory loss."));
        assert!(log[2].prompt_text().contains("monthly medication reviews"));
        assert!(log[0].prompt_text().contains("donepezil"));
    }

    #[test]
    fn missing_heading_named() {
        let broken = FOLLOW.replace("## Escalation Criteria\nFalls or wandering.\n", "");
        let p = ByRole::new(&[("assessment", "a"), ("care-plan", "b"), ("follow-up", &broken)]);
        let run = run_support_plan(&intake(), &p, &WorkflowConfig::default());
        let err = run.result.unwrap_err();
        assert_eq!(err.code(), "ValidationFailure");
        assert_eq!(err.subject(), Some("Escalation Criteria"));
        assert_eq!(run.transcript.status, RunState::Failed);
        assert_eq!(run.transcript.steps.len(), 3);
    }

    #[test]
    fn validator_cases() {
        assert!(validate_followup(FOLLOW).is_ok());
        let swapped = FOLLOW
            .replace("## Check-in Cadence", "## TMP")
            .replace("## Tracking Template", "## Check-in Cadence")
            .replace("## TMP", "## Tracking Template");
        assert_eq!(validate_followup(&swapped).unwrap_err().subject(), Some("Check-in Cadence"));
        let extra = alloc::format!("{FOLLOW}## Bonus\nx\n");
        assert_eq!(validate_followup(&extra).unwrap_err().subject(), Some("Bonus"));
        let lower = FOLLOW.replace("## Tracking Template", "## tracking template");
        assert_eq!(validate_followup(&lower).unwrap_err().subject(), Some("Tracking Template"));
    }

    #[test]
    fn agent_failure_keeps_prefix() {
        let p = ByRole::new(&[("assessment", "a"), ("care-plan", "  ")]);
        let run = run_support_plan(&intake(), &p, &WorkflowConfig::default());
        assert_eq!(run.result.unwrap_err().code(), "AgentFailure");
        assert_eq!(run.transcript.steps[0].output.as_ref().unwrap().render(), "a");
        assert!(run.transcript.check_invariants().is_ok());
    }
}
