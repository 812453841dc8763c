//! Request/response negotiation of TWT parameters. The AP always has the
//! final say: it accepts, counters, dictates or rejects.

use thiserror::Error;

use super::{MessageError, TwtCommand, TwtMessage, TwtParams};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NegotiationError {
    #[error("expected a request, got {0:?}")]
    NotARequest(TwtCommand),
    #[error("malformed message: {0}")]
    Malformed(#[from] MessageError),
    #[error("round {round} exceeds the limit of {max_rounds}")]
    RoundLimit { round: u32, max_rounds: u32 },
}

/// AP-side admission rules.
pub trait TwtPolicy {
    fn acceptable(&self, params: &TwtParams) -> bool;
    /// Parameters offered when the requester's set is absent or unacceptable.
    fn preferred(&self, request: &TwtMessage) -> TwtParams;
}

/// Fixed preferred set plus an admission predicate.
pub struct PreferredParams<F> {
    pub preferred: TwtParams,
    pub acceptable: F,
}

impl<F: Fn(&TwtParams) -> bool> TwtPolicy for PreferredParams<F> {
    fn acceptable(&self, params: &TwtParams) -> bool {
        (self.acceptable)(params)
    }

    fn preferred(&self, _request: &TwtMessage) -> TwtParams {
        self.preferred
    }
}

/// Answers one request. `round` counts request/response pairs from 1; on the
/// last allowed round anything short of Accept becomes Reject.
pub fn negotiate<P: TwtPolicy + ?Sized>(
    incoming: &TwtMessage,
    policy: &P,
    round: u32,
    max_rounds: u32,
) -> Result<TwtMessage, NegotiationError> {
    if round > max_rounds {
        return Err(NegotiationError::RoundLimit { round, max_rounds });
    }
    if incoming.command.direction() != super::Direction::Request {
        return Err(NegotiationError::NotARequest(incoming.command));
    }
    incoming.validate()?;

    let ok = |p: &TwtParams| p.validate().is_ok() && policy.acceptable(p);
    let preferred = policy.preferred(incoming);
    let preferred = ok(&preferred).then_some(preferred);

    let (command, params) = match (incoming.command, incoming.params) {
        (TwtCommand::Demand, Some(p)) if ok(&p) => (TwtCommand::Accept, Some(p)),
        (TwtCommand::Demand, _) => (TwtCommand::Reject, None),
        (TwtCommand::Suggest, Some(p)) if ok(&p) => (TwtCommand::Accept, Some(p)),
        (TwtCommand::Suggest, _) => match preferred {
            Some(alt) => (TwtCommand::Alternate, Some(alt)),
            None => (TwtCommand::Reject, None),
        },
        (TwtCommand::Request, Some(p)) if ok(&p) => (TwtCommand::Accept, Some(p)),
        (TwtCommand::Request, Some(_)) => match preferred {
            Some(alt) => (TwtCommand::Dictate, Some(alt)),
            None => (TwtCommand::Reject, None),
        },
        (TwtCommand::Request, None) => match preferred {
            Some(alt) => (TwtCommand::Accept, Some(alt)),
            None => (TwtCommand::Reject, None),
        },
        (c, _) => return Err(NegotiationError::NotARequest(c)),
    };
    let (command, params) = if round == max_rounds && command != TwtCommand::Accept {
        (TwtCommand::Reject, None)
    } else {
        (command, params)
    };
    Ok(TwtMessage {
        broadcast: if params.is_some() { incoming.broadcast } else { None },
        ..TwtMessage::response(command, incoming.agreement_id, params)
    })
}

/// Requesting station's reaction to a non-final response.
pub trait StationStrategy {
    fn follow_up(&mut self, response: &TwtMessage) -> TwtMessage;
}

/// Takes whatever the AP offers: an Alternate is re-suggested, a Dictate is
/// demanded back.
pub struct AcceptAlternatives;

impl StationStrategy for AcceptAlternatives {
    fn follow_up(&mut self, response: &TwtMessage) -> TwtMessage {
        let command = match response.command {
            TwtCommand::Dictate => TwtCommand::Demand,
            _ => TwtCommand::Suggest,
        };
        TwtMessage {
            broadcast: response.broadcast,
            ..TwtMessage::request(command, response.agreement_id, response.params)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DialogueOutcome {
    Accepted(TwtParams),
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dialogue {
    pub messages: Vec<TwtMessage>,
    pub outcome: DialogueOutcome,
}

impl Dialogue {
    pub fn rounds(&self) -> usize {
        self.messages.len() / 2
    }
}

/// Plays a full negotiation starting with `first` until Accept or Reject.
pub fn run_dialogue<P: TwtPolicy + ?Sized, S: StationStrategy + ?Sized>(
    first: TwtMessage,
    policy: &P,
    station: &mut S,
    max_rounds: u32,
) -> Result<Dialogue, NegotiationError> {
    let mut messages = Vec::new();
    let mut request = first;
    for round in 1..=max_rounds {
        let response = negotiate(&request, policy, round, max_rounds)?;
        messages.push(request);
        messages.push(response);
        match response.command {
            TwtCommand::Accept => {
                return Ok(Dialogue {
                    messages,
                    outcome: DialogueOutcome::Accepted(response.params.expect("Accept carries params")),
                })
            }
            TwtCommand::Reject => {
                return Ok(Dialogue {
                    messages,
                    outcome: DialogueOutcome::Rejected,
                })
            }
            _ => request = station.follow_up(&response),
        }
    }
    unreachable!("the last round always ends in Accept or Reject")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::twt::tests::params;

    fn policy_accepting(set: Vec<TwtParams>, preferred: TwtParams) -> PreferredParams<impl Fn(&TwtParams) -> bool> {
        PreferredParams {
            preferred,
            acceptable: move |p: &TwtParams| set.contains(p),
        }
    }

    fn other() -> TwtParams {
        TwtParams {
            target_wake_time_us: 10_000,
            ..params()
        }
    }

    #[test]
    fn demand_accepted_verbatim() {
        let pol = policy_accepting(vec![params()], other());
        let r = negotiate(&TwtMessage::request(TwtCommand::Demand, 2, Some(params())), &pol, 1, 4).unwrap();
        assert_eq!(r.command, TwtCommand::Accept);
        assert_eq!(r.params, Some(params()));
        assert_eq!(r.agreement_id, 2);
    }

    #[test]
    fn demand_has_no_alternative() {
        let pol = policy_accepting(vec![other()], other());
        let r = negotiate(&TwtMessage::request(TwtCommand::Demand, 0, Some(params())), &pol, 1, 4).unwrap();
        assert_eq!(r.command, TwtCommand::Reject);
        assert_eq!(r.params, None);
    }

    #[test]
    fn request_without_preference_gets_ap_set() {
        let pol = policy_accepting(vec![other()], other());
        let r = negotiate(&TwtMessage::request(TwtCommand::Request, 0, None), &pol, 1, 4).unwrap();
        assert_eq!(r.command, TwtCommand::Accept);
        assert_eq!(r.params, Some(other()));
    }

    #[test]
    fn request_with_unacceptable_set_is_dictated() {
        let pol = policy_accepting(vec![other()], other());
        let r = negotiate(&TwtMessage::request(TwtCommand::Request, 0, Some(params())), &pol, 1, 4).unwrap();
        assert_eq!(r.command, TwtCommand::Dictate);
        assert_eq!(r.params, Some(other()));
    }

    #[test]
    fn suggest_alternate_suggest_accept() {
        let pol = policy_accepting(vec![other()], other());
        let d = run_dialogue(
            TwtMessage::request(TwtCommand::Suggest, 0, Some(params())),
            &pol,
            &mut AcceptAlternatives,
            4,
        )
        .unwrap();
        let cmds: Vec<TwtCommand> = d.messages.iter().map(|m| m.command).collect();
        assert_eq!(
            cmds,
            vec![TwtCommand::Suggest, TwtCommand::Alternate, TwtCommand::Suggest, TwtCommand::Accept]
        );
        assert_eq!(d.outcome, DialogueOutcome::Accepted(other()));
        assert_eq!(d.rounds(), 2);
    }

    #[test]
    fn last_round_forces_reject() {
        let pol = policy_accepting(vec![other()], other());
        let r = negotiate(&TwtMessage::request(TwtCommand::Suggest, 0, Some(params())), &pol, 3, 3).unwrap();
        assert_eq!(r.command, TwtCommand::Reject);
        assert!(matches!(
            negotiate(&TwtMessage::request(TwtCommand::Suggest, 0, Some(params())), &pol, 4, 3),
            Err(NegotiationError::RoundLimit { .. })
        ));
    }

    #[test]
    fn short_wake_duration_never_accepted() {
        let short = TwtParams {
            min_wake_duration_us: 0,
            ..params()
        };
        let pol = PreferredParams {
            preferred: params(),
            acceptable: |_: &TwtParams| true,
        };
        // malformed demand: parameters violate the 256 us floor
        assert!(matches!(
            negotiate(&TwtMessage::request(TwtCommand::Demand, 0, Some(short)), &pol, 1, 4),
            Err(NegotiationError::Malformed(_))
        ));
        // an AP preferring an illegal set can only reject
        let bad_pol = PreferredParams {
            preferred: short,
            acceptable: |_: &TwtParams| true,
        };
        let r = negotiate(&TwtMessage::request(TwtCommand::Request, 0, None), &bad_pol, 1, 4).unwrap();
        assert_eq!(r.command, TwtCommand::Reject);
    }

    #[test]
    fn response_in_request_direction_is_malformed() {
        let pol = policy_accepting(vec![params()], params());
        let accept = TwtMessage::request(TwtCommand::Accept, 0, Some(params()));
        assert!(matches!(negotiate(&accept, &pol, 1, 4), Err(NegotiationError::NotARequest(_))));
        let mislabeled = TwtMessage::response(TwtCommand::Suggest, 0, Some(params()));
        assert!(matches!(negotiate(&mislabeled, &pol, 1, 4), Err(NegotiationError::Malformed(_))));
    }
}
