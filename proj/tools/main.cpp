#include "gridmpc/cli.hpp"

int main(int argc, char** argv) { return gridmpc::main_dispatch(argc, argv); }
