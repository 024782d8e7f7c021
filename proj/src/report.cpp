#include "emm/report.hpp"

#include <cstdio>

namespace emm {

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x + 0.0); // no "-0"
  return buf;
}

void write_energy_csv(std::ostream &out, const EnergySeries &s) {
  out << "t,E,E_bar,f_E,E_tilde\n";
  for (std::size_t k = 0; k < s.t.size(); ++k)
    out << format_double(s.t[k]) << ',' << format_double(s.E[k]) << ','
        << format_double(s.E_bar[k]) << ',' << format_double(s.f_E[k]) << ','
        << format_double(s.E_tilde[k]) << '\n';
}

void write_energy_log_csv(std::ostream &out, const Trajectory &traj) {
  out << "t,E\n";
  for (int k = 0; k <= traj.steps(); ++k)
    out << format_double(traj.time(k)) << ',' << format_double(traj.energy_log[k])
        << '\n';
}

void write_snapshot_csv(std::ostream &out, const DiscreteOperators &ops,
                        const Trajectory &traj, const std::vector<int> &steps) {
  out << "t,field,index,branch,c0,c1,c2\n";
  for (int k : steps) {
    if (k < 0 || k > traj.steps())
      continue;
    const RSState &s = traj.states[k];
    const std::string t = format_double(traj.time(k));
    for (int i = 0; i < ops.num_nodes(); ++i)
      out << t << ",v," << i << ",," << format_double(s.v(2 * i)) << ','
          << format_double(s.v(2 * i + 1)) << ",\n";
    for (int e = 0; e < ops.num_elements(); ++e)
      for (int j = 0; j < ops.num_branches(); ++j) {
        const auto p = s.psi_block(ops, e, j);
        out << t << ",psi," << e << ',' << j + 1 << ',' << format_double(p(0))
            << ',' << format_double(p(1)) << ',' << format_double(p(2)) << '\n';
      }
  }
}

void write_control_csv(std::ostream &out, const DiscreteOperators &ops,
                       const std::vector<Vec> &xi, double dt) {
  out << "t_mid,node_id,xi_x,xi_y\n";
  for (std::size_t k = 0; k < xi.size(); ++k) {
    const std::string t = format_double((static_cast<double>(k) + 0.5) * dt);
    for (int node : ops.neumann_nodes)
      out << t << ',' << node << ',' << format_double(xi[k](2 * node)) << ','
          << format_double(xi[k](2 * node + 1)) << '\n';
  }
}

void write_bvs_csv(std::ostream &out, const DiscreteOperators &ops,
                   const BVSTrajectory &traj, const std::vector<int> &steps) {
  out << "t,node_id,u_x,u_y,v_x,v_y\n";
  const int n = static_cast<int>(traj.u.size()) - 1;
  for (int k : steps) {
    if (k < 0 || k > n)
      continue;
    const std::string t = format_double(traj.dt * k);
    for (int i = 0; i < ops.num_nodes(); ++i)
      out << t << ',' << i << ',' << format_double(traj.u[k](2 * i)) << ','
          << format_double(traj.u[k](2 * i + 1)) << ','
          << format_double(traj.v[k](2 * i)) << ','
          << format_double(traj.v[k](2 * i + 1)) << '\n';
  }
}

Json to_json(const DecayReport &r) {
  Json j;
  j["a4_hat"] = r.a4_hat;
  j["prefactor_hat"] = r.prefactor_hat;
  j["amplitude_hat"] = r.amplitude_hat;
  j["r_squared"] = r.r_squared;
  j["window"] = {r.t_lo, r.t_hi};
  return j;
}

Json to_json(const ContractionEstimate &e) {
  Json j;
  j["rho_hat"] = e.rho_hat;
  j["one_step_max"] = e.one_step_max;
  j["probes"] = e.probes;
  j["iterations"] = e.iterations;
  j["method"] = e.method;
  j["note"] = "probe estimate (lower-bound style), not a proven operator norm";
  j["root_sequence"] = e.root_sequence;
  j["ratio_sequence"] = e.ratio_sequence;
  return j;
}

Json failure_json(const std::string &command, const std::vector<Failure> &f) {
  Json j;
  j["command"] = command;
  j["status"] = "tolerance_failure";
  Json list = Json::array();
  for (const auto &x : f)
    list.push_back({{"check", x.check},
                    {"value", x.value},
                    {"tolerance", x.tolerance},
                    {"detail", x.detail}});
  j["failures"] = list;
  return j;
}

} // namespace emm
