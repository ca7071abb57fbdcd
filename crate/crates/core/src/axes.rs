//! The enumerations that index knowledge: disaster phase, MOF level,
//! agent-oriented tag, and agent-based model kind.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown {what} `{value}`")]
pub struct UnknownVariant {
    pub what: &'static str,
    pub value: String,
}

macro_rules! keyword_enum {
    (
        $(#[$meta:meta])*
        $name:ident, $what:literal {
            $($variant:ident => $kw:literal $(| $alias:literal)*),+ $(,)?
        }
    ) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $kw)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn keyword(self) -> &'static str {
                match self {
                    $($name::$variant => $kw),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.keyword())
            }
        }

        impl FromStr for $name {
            type Err = UnknownVariant;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                let lower = s.trim().to_ascii_lowercase();
                match lower.as_str() {
                    $($kw $(| $alias)* => Ok($name::$variant),)+
                    _ => Err(UnknownVariant { what: $what, value: s.to_string() }),
                }
            }
        }
    };
}

keyword_enum! {
    /// PPRR phase. Declaration order is the display/sort order.
    PhaseId, "phase" {
        Prevention => "prevention",
        Preparedness => "preparedness",
        Response => "response",
        Recovery => "recovery",
    }
}

keyword_enum! {
    /// MOF layer of a plan element: M1 holds reusable categories, M0 individuals.
    MofLevel, "MOF level" {
        M0 => "m0" | "mo",
        M1 => "m1",
    }
}

keyword_enum! {
    AgentTag, "agent tag" {
        Goal => "goal",
        Role => "role",
        Agent => "agent",
        Activity => "activity",
        Event => "event",
        EnvironmentEntity => "environment-entity" | "environmententity",
        Interaction => "interaction",
        Organisation => "organisation" | "organization",
    }
}

keyword_enum! {
    /// The seven agent-based model kinds.
    AbmKind, "model kind" {
        GoalModel => "goal" | "goal-model",
        RoleModel => "role" | "role-model",
        OrganisationModel => "organisation" | "organization" | "organisation-model",
        InteractionModel => "interaction" | "interaction-model",
        EnvironmentModel => "environment" | "environment-model",
        AgentModel => "agent" | "agent-model",
        ScenarioModel => "scenario" | "scenario-model",
    }
}

impl AgentTag {
    /// Interaction and Organisation are not part of the base tag vocabulary;
    /// they exist so that every model kind has at least one tag.
    pub fn is_extended(self) -> bool {
        matches!(self, AgentTag::Interaction | AgentTag::Organisation)
    }

    /// Stereotype form, e.g. `<<Goal>>`.
    pub fn stereotype(self) -> String {
        let name = match self {
            AgentTag::Goal => "Goal",
            AgentTag::Role => "Role",
            AgentTag::Agent => "Agent",
            AgentTag::Activity => "Activity",
            AgentTag::Event => "Event",
            AgentTag::EnvironmentEntity => "EnvironmentEntity",
            AgentTag::Interaction => "Interaction",
            AgentTag::Organisation => "Organisation",
        };
        format!("<<{name}>>")
    }
}

impl AbmKind {
    /// Tags a concept must carry to receive an element of this model kind.
    pub fn compatible_tags(self) -> &'static [AgentTag] {
        match self {
            AbmKind::GoalModel => &[AgentTag::Goal],
            AbmKind::RoleModel => &[AgentTag::Role],
            AbmKind::AgentModel => &[AgentTag::Agent, AgentTag::Event],
            AbmKind::EnvironmentModel => &[AgentTag::EnvironmentEntity],
            AbmKind::ScenarioModel => &[AgentTag::Activity, AgentTag::Event],
            AbmKind::InteractionModel => &[AgentTag::Interaction],
            AbmKind::OrganisationModel => &[AgentTag::Organisation],
        }
    }

    /// MOF level given to elements of this kind when the template does not mark them.
    pub fn default_mof(self) -> MofLevel {
        match self {
            AbmKind::GoalModel
            | AbmKind::RoleModel
            | AbmKind::OrganisationModel
            | AbmKind::InteractionModel => MofLevel::M1,
            AbmKind::EnvironmentModel | AbmKind::AgentModel | AbmKind::ScenarioModel => MofLevel::M0,
        }
    }

    /// Element name used in the interchange document for the model container.
    pub fn model_element(self) -> &'static str {
        match self {
            AbmKind::GoalModel => "goal-model",
            AbmKind::RoleModel => "role-model",
            AbmKind::OrganisationModel => "organisation-model",
            AbmKind::InteractionModel => "interaction-model",
            AbmKind::EnvironmentModel => "environment-model",
            AbmKind::AgentModel => "agent-model",
            AbmKind::ScenarioModel => "scenario-model",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phase_order_follows_pprr() {
        let mut phases = vec![PhaseId::Recovery, PhaseId::Prevention, PhaseId::Response, PhaseId::Preparedness];
        phases.sort();
        assert_eq!(phases, PhaseId::ALL);
    }

    #[test]
    fn keywords_round_trip() {
        for tag in AgentTag::ALL {
            assert_eq!(tag.keyword().parse::<AgentTag>().unwrap(), *tag);
        }
        for kind in AbmKind::ALL {
            assert_eq!(kind.keyword().parse::<AbmKind>().unwrap(), *kind);
        }
        assert_eq!("Mo".parse::<MofLevel>().unwrap(), MofLevel::M0);
        assert!("concurrent".parse::<PhaseId>().is_err());
    }

    #[test]
    fn only_two_tags_are_extended() {
        let extended: Vec<_> = AgentTag::ALL.iter().filter(|t| t.is_extended()).collect();
        assert_eq!(extended, [&AgentTag::Interaction, &AgentTag::Organisation]);
        assert_eq!(AgentTag::ALL.len(), 8);
        assert_eq!(AbmKind::ALL.len(), 7);
    }

    #[test]
    fn every_kind_has_a_tag() {
        for kind in AbmKind::ALL {
            assert!(!kind.compatible_tags().is_empty());
        }
    }
}
