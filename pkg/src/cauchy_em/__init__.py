"""Monte-Carlo EM for skewed Cauchy distributions and Cauchy mixtures."""
