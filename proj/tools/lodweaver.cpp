#include "lodweaver/cli.hpp"

int main(int argc, char** argv) { return lodweaver::run_cli(argc, argv); }
