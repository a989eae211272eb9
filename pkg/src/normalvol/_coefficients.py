"""Rational coefficient tables as published decimal literals.

Ascending powers, ``b[0] == 1``.  Parsed to binary64 with ``float``, which
rounds correctly.
"""

LFK2026_ITM = (
    (
        "2.50662827463100069e+00",
        "8.26914966237441540e+00",
        "1.10083895644891214e+01",
        "7.62695942399991100e+00",
        "2.96457253391146036e+00",
        "6.51812439800918964e-01",
        "7.81257091685455263e-02",
        "4.67776338554095131e-03",
        "1.17427118047196583e-04",
        "8.06959950534549627e-07",
        "-3.39451638335349906e-10",
    ),
    (
        "1.00000000000000000e+00",
        "3.79891342328838499e+00",
        "5.87074621959482457e+00",
        "4.76157470081986212e+00",
        "2.18581925252758946e+00",
        "5.72905243689549204e-01",
        "8.27294623127229206e-02",
        "6.05262799121958784e-03",
        "1.90358881940080979e-04",
        "1.76070970713414280e-06",
    ),
)

LFK2026_OTM1 = (
    (
        "1.24910559446641112e+00",
        "8.30013684602045146e+02",
        "2.89118707775471907e+05",
        "6.20616261157058701e+07",
        "8.81948242946073532e+09",
        "8.14953597568851318e+11",
        "4.61473754119971406e+13",
        "1.32385751716178975e+15",
        "1.35683441709766740e+16",
        "2.23602102096865640e+16",
        "-1.15188057059215700e+16",
    ),
    (
        "1.00000000000000000e+00",
        "9.50178311644246946e+02",
        "4.30671117130989209e+05",
        "1.19319078802154481e+08",
        "2.18139815883858109e+10",
        "2.66113331187980811e+12",
        "2.08194332615256938e+14",
        "9.31612904921204000e+15",
        "1.78457095251951296e+17",
        "9.01018167981477888e+17",
    ),
)

LFK2026_OTM2 = (
    (
        "1.25087969033276813e+00",
        "2.09344504116440078e+02",
        "-1.74963499510044603e+04",
        "-1.28046460022976995e+07",
        "-1.43888265763526964e+09",
        "-5.70761754440745773e+10",
        "-8.98414557472468994e+11",
        "-5.46607883881420703e+12",
        "-1.07736581582367109e+13",
        "-3.54669640321780615e+12",
        "4.53512764886659485e+11",
    ),
    (
        "1.00000000000000000e+00",
        "4.55619235679538008e+02",
        "4.19868074702521844e+04",
        "-1.48653150107890852e+07",
        "-4.63359666129231930e+09",
        "-3.39232384615881042e+11",
        "-8.93831987833861328e+12",
        "-9.10822517732905625e+13",
        "-3.32157260465782750e+14",
        "-3.16204789033010312e+14",
    ),
)

LFK2026_OTM3 = (
    (
        "1.61713874667576762e+00",
        "1.63839367097254751e+02",
        "4.52092618390189637e+03",
        "4.73452995425928821e+04",
        "2.11536138072810922e+05",
        "4.14000232322855853e+05",
        "3.38490556724923430e+05",
        "9.82243936325080576e+04",
        "5.74901275345015438e+03",
        "-1.25257952774401772e+02",
        "4.62144628906322019e+00",
    ),
    (
        "1.00000000000000000e+00",
        "6.08432004257079598e+02",
        "3.37041720211591382e+04",
        "5.83977840443553636e+05",
        "4.03973802769196732e+06",
        "1.20766363495907933e+07",
        "1.55296990844987314e+07",
        "7.83292053799574263e+06",
        "1.16810498733679834e+06",
        "5.54442814599942540e+03",
    ),
)

LFK2026C_LOW = (
    (
        "2.50662827463100069e+00",
        "4.33803460770355898e+00",
        "2.36504153278287266e+00",
        "4.35189695439266722e-01",
        "1.77075775698172025e-02",
    ),
    (
        "1.00000000000000000e+00",
        "2.23062541885758314e+00",
        "1.63840524330855919e+00",
        "4.35646805136993498e-01",
        "2.96543644408861981e-02",
    ),
)

LFK2026C_HIGH = (
    (
        "2.50662827462874782e+00",
        "7.07601239545194982e+00",
        "7.79838748842165330e+00",
        "4.28317532357895026e+00",
        "1.24534893861795548e+00",
        "1.88932466067008031e-01",
        "1.38619741425921022e-02",
        "4.15460128562968034e-04",
        "3.33224453410284549e-06",
        "-1.65051672752885574e-09",
    ),
    (
        "1.00000000000000000e+00",
        "3.32292052116718439e+00",
        "4.35214422048696914e+00",
        "2.86841498456426436e+00",
        "1.01064393092251747e+00",
        "1.87748433761637329e-01",
        "1.70940757504186268e-02",
        "6.51089901103861003e-04",
        "7.12577601891527465e-06",
    ),
)
