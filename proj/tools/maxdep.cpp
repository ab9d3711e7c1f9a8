#include "maxdep_cli.hpp"

int main(int argc, char** argv) { return maxdep::cli::run(argc, argv); }
