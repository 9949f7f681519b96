// Regenerates the bundled scenario files from their builders.
// Usage: dump_scenarios <output-dir>

#include <iostream>

#include "tiersim/scenario_io.hpp"
#include "tiersim/scenarios.hpp"

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: dump_scenarios <output-dir>\n";
    return 2;
  }
  std::string dir = argv[1];
  for (const std::string& name : tiersim::scenarios::bundled_names()) {
    tiersim::ScenarioSpec sc = tiersim::scenarios::by_name(name);
    std::string path = dir + "/" + name + ".json";
    tiersim::write_text_file(path, tiersim::scenario_to_json(sc).dump(2) + "\n");
    std::cout << "wrote " << path << "\n";
  }
  return 0;
}
