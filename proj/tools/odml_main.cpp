#include "odml/cli.hpp"

int main(int argc, char** argv) { return odml::run_cli(argc, argv); }
