//! Gnuplot scripts that read the CSV files written next to them.

pub fn spectrum(fields: usize) -> String {
    let mut s = String::from(
        "set datafile separator ','\nset key autotitle columnhead\nset xlabel 'f (GHz)'\nset ylabel 'amplitude (1/Hz)'\n",
    );
    if fields == 1 {
        s.push_str("plot 'spectrum.csv' using ($1/1e9):2 with lines title 'spectrum'\n");
    } else {
        let parts: Vec<String> = (0..fields)
            .map(|k| format!("'spectrum_{k}.csv' using ($1/1e9):2 with lines title 'field {k}'"))
            .collect();
        s.push_str(&format!("plot {}\n", parts.join(", \\\n     ")));
    }
    s
}

pub fn magnetization() -> String {
    "set datafile separator ','\n\
     set xlabel 'mu_B B d(1/T) / 2k_B'\n\
     set ylabel 'dPhi_m (Phi_0)'\n\
     f(x) = a*x + b\n\
     fit f(x) 'polarization.csv' using 4:5 every ::1 via a, b\n\
     plot 'polarization.csv' using 4:5 every ::1 with points title 'data', f(x) title 'fit'\n"
        .to_string()
}

pub fn esr_sim() -> String {
    "set datafile separator ','\n\
     set multiplot layout 2,1\n\
     set xlabel 'f_ESR (GHz)'\n\
     set ylabel 'dPhi (Phi_0)'\n\
     plot 'esr_extracted.csv' using ($1/1e9):2 every ::1 with lines title 'extracted'\n\
     set ylabel 'f_drive (GHz)'\n\
     plot 'esr_scan.csv' matrix nonuniform using ($2/1e9):($1/1e9):3 with image title 'P_sw'\n\
     unset multiplot\n"
        .to_string()
}

pub fn noise() -> String {
    "set datafile separator ','\n\
     set multiplot layout 1,2\n\
     set logscale xy\n\
     set xlabel 'N_rep'\n\
     set ylabel 'sigma P_sw'\n\
     plot 'sigma_vs_nrep.csv' using 1:2 every ::1 with linespoints title 'simulated', \\\n\
          '' using 1:3 every ::1 with lines title 'binomial'\n\
     set xlabel 'f (Hz)'\n\
     set ylabel 'S (1/Hz)'\n\
     plot 'psd.csv' using 1:2 every ::1 with lines title 'Welch PSD'\n\
     unset multiplot\n"
        .to_string()
}
