use std::any::Any;

use serde_json::{json, Value};

use crate::chain::{AccountId, CallContext, Contract, ContractError};

/// Stage-0 side contract. It relays its owner's escrow calls, so the escrow sees
/// it as the slot owner, and forwards every coin it receives to `beneficiary`.
#[derive(Clone, Debug)]
pub struct Redirector {
    pub owner: AccountId,
    pub beneficiary: AccountId,
    pub escrow: AccountId,
}

impl Contract for Redirector {
    fn call(&mut self, ctx: &mut CallContext<'_>, function: &str, args: &[Value]) -> Result<Value, ContractError> {
        if function != "relay" {
            return Err(ContractError::UnknownFunction(function.to_string()));
        }
        if ctx.caller != self.owner {
            return Err(ContractError::Rejected(format!("relay: caller {} is not the owner", ctx.caller)));
        }
        let (Some(Value::String(f)), Some(Value::Array(inner))) = (args.first(), args.get(1)) else {
            return Err(ContractError::BadArgs("expected [function, [args]]".into()));
        };
        let coins = ctx.attached;
        ctx.call(self.escrow, f, inner, coins)
    }

    fn on_tick(&mut self, ctx: &mut CallContext<'_>) -> Option<Value> {
        let held = ctx.own_balance();
        if held == 0 {
            return None;
        }
        ctx.transfer(self.beneficiary, held).ok()?;
        Some(json!({ "forwarded": held, "to": self.beneficiary }))
    }

    fn clone_box(&self) -> Box<dyn Contract> {
        Box::new(self.clone())
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}
