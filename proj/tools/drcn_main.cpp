#include "drcn/cli/app.hpp"

int main(int argc, char** argv) { return drcn::cli::run(argc, argv); }
