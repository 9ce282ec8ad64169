#include "edaan/commands.hpp"

int main(int argc, char** argv) { return edaan::run_cli(argc, argv); }
