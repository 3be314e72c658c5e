#include "dislo/acceptance.hpp"

#include <cstdio>
#include <cstdlib>
#include <string>

// Usage: acceptance_main [criterion ids...]; writes acceptance_report.json next to the working directory.
int main(int argc, char** argv) {
  dislo::AcceptanceOptions opt;
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
  try {
    auto results = dislo::run_acceptance(opt, only);
    dislo::Json all = dislo::Json::array();
    bool ok = true;
    for (const auto& r : results) {
      std::printf("%s\n", dislo::summary_line(r).c_str());
      std::fflush(stdout);
      all.push_back(dislo::to_json(r));
      ok = ok && r.pass;
    }
    dislo::write_json("acceptance_report.json", all);
    std::printf("%s\n", ok ? "all criteria passed" : "some criteria failed");
    return ok ? 0 : 1;
  } catch (const std::exception& e) {
    std::printf("error: %s\n", e.what());
    return 3;
  }
}
