# Core numerical modules
