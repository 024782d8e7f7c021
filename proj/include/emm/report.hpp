#ifndef EMM_REPORT_HPP
#define EMM_REPORT_HPP

// CSV / JSON output. Every double in CSV is printed with 17 significant
// digits so that identical runs give byte-identical files.

#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "emm/bvs.hpp"
#include "emm/control.hpp"
#include "emm/energy.hpp"

namespace emm {

using Json = nlohmann::ordered_json;

std::string format_double(double x);

/// t,E,E_bar,f_E,E_tilde
void write_energy_csv(std::ostream &out, const EnergySeries &s);
/// t,E
void write_energy_log_csv(std::ostream &out, const Trajectory &traj);
/// Long format snapshot rows: t,field,index,branch,c0,c1,c2 where field is
/// "v" (index = node, c2 empty) or "psi" (index = element).
void write_snapshot_csv(std::ostream &out, const DiscreteOperators &ops,
                        const Trajectory &traj, const std::vector<int> &steps);
/// t_mid,node_id,xi_x,xi_y on Neumann nodes.
void write_control_csv(std::ostream &out, const DiscreteOperators &ops,
                       const std::vector<Vec> &xi, double dt);
/// t,node_id,u_x,u_y,v_x,v_y at the requested steps.
void write_bvs_csv(std::ostream &out, const DiscreteOperators &ops,
                   const BVSTrajectory &traj, const std::vector<int> &steps);

Json to_json(const DecayReport &r);
Json to_json(const ContractionEstimate &e);

struct Failure {
  std::string check;
  double value = 0.0;
  double tolerance = 0.0;
  std::string detail;
};
Json failure_json(const std::string &command, const std::vector<Failure> &f);

} // namespace emm

#endif // EMM_REPORT_HPP
