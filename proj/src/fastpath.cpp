#include "qstack/fastpath.hpp"

namespace qstack {

std::string ActionSet::to_string() const {
  if (none()) return "None";
  std::string s;
  auto add = [&](FcdAction a, const char* name) {
    if (!has(a)) return;
    if (!s.empty()) s += '|';
    s += name;
  };
  add(FcdAction::DrainNic, "DrainNic");
  add(FcdAction::TcpBatch, "TcpBatch");
  add(FcdAction::Reschedule, "Reschedule");
  add(FcdAction::PriorityYield, "PriorityYield");
  return s;
}

ActionSet fastcalldown_check(const FcdThresholds& th, FcdState& state, const CheckContext& ctx) {
  ActionSet out;
  if (ctx.hosts_stack) {
    if (ctx.now - state.last_nic_check >= th.nic_check_interval) {
      out.add(FcdAction::DrainNic);
      state.last_nic_check = ctx.now;
    }
    if (ctx.now - state.last_tcp_process >= th.tcp_process_interval) {
      out.add(FcdAction::TcpBatch);
      state.last_tcp_process = ctx.now;
    }
  }
  if (ctx.now - ctx.run_start >= th.coroutine_budget) out.add(FcdAction::Reschedule);
  if (th.priority_check && ctx.running_serves_low && ctx.high_pending_elsewhere) out.add(FcdAction::PriorityYield);
  return out;
}

CostComparison cost_compare(std::int64_t n, Nanos empty_check_cost, Nanos check_cost, std::int64_t calls_per_request,
                            Nanos yield_cost) {
  return CostComparison{check_cost * calls_per_request * n + empty_check_cost, (yield_cost + empty_check_cost) * n};
}

void CallupRegistry::register_callup(Layer layer, std::optional<FlowId> flow, Callup callback) {
  switch (layer) {
    case Layer::Driver: {
      auto* fn = std::get_if<DriverExtractionFn>(&callback);
      if (!fn) throw Error(ErrorCode::CallbackMismatch, "driver layer takes a stateless packet classifier");
      if (flow) throw Error(ErrorCode::InvalidConfig, "driver-layer callbacks are global");
      driver_->set(*fn);
      return;
    }
    case Layer::Tcp: {
      auto* fn = std::get_if<TcpExtractionFn>(&callback);
      if (!fn) throw Error(ErrorCode::CallbackMismatch, "tcp layer takes a private-field classifier");
      if (!flow) throw Error(ErrorCode::InvalidConfig, "tcp-layer callbacks are registered per flow");
      tcp_.register_extraction(*flow, *fn);
      return;
    }
    case Layer::Nic:
    case Layer::EventFramework:
      break;
  }
  throw Error(ErrorCode::UnsupportedLayer, "no fastcallup extraction point at this layer");
}

}  // namespace qstack
